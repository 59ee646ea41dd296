//! The simple random walk on the cylinder `G x N`, its excursions at a
//! reference layer, and exact samplers for walks that wander above it.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson, StandardNormal};
use thiserror::Error;

use crate::graph::RegularGraph;
use crate::rng;
use crate::spectral;
use crate::stats::{BoundCheck, Direction, EstimateSummary};

/// Default cap on explicitly simulated steps per particle or excursion.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;
/// Default starting layer for explicit excursion sampling.
pub const DEFAULT_EXCURSION_OFFSET: u64 = 1_000_000;
/// A `K`-step base walk is replaced by a uniform draw once
/// `n * lambda^K` falls below this.
pub const UNIFORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CylinderPosition {
    pub g: usize,
    pub zeta: u64,
}

impl CylinderPosition {
    pub fn new(g: usize, zeta: u64) -> Self {
        CylinderPosition { g, zeta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// A move along a slot of `G`, loop slots included.
    Base,
    Up,
    Down,
}

/// How loop slots of the base graph act on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopSemantics {
    /// A loop slot keeps `g` and the layer: a wasted base move.
    #[default]
    Stay,
    /// Deliberately wrong: a loop slot becomes a vertical move. Only for
    /// negative-control tests.
    Vertical,
}

/// One step of the simple random walk: uniform over the `d` slots and the
/// two vertical moves, or over `d + 1` options on layer 0.
#[inline]
pub fn step<R: Rng + ?Sized>(g: &RegularGraph, pos: CylinderPosition, rng: &mut R) -> CylinderPosition {
    step_with(g, pos, LoopSemantics::Stay, rng).0
}

#[inline]
pub fn step_with<R: Rng + ?Sized>(
    g: &RegularGraph,
    pos: CylinderPosition,
    loops: LoopSemantics,
    rng: &mut R,
) -> (CylinderPosition, StepKind) {
    let d = g.degree();
    let options = if pos.zeta == 0 { d + 1 } else { d + 2 };
    let k = rng::index(rng, options);
    if k < d {
        let u = g.neighbor(pos.g, k);
        if u == pos.g && loops == LoopSemantics::Vertical {
            return if pos.zeta == 0 || rng.random::<bool>() {
                (CylinderPosition::new(pos.g, pos.zeta + 1), StepKind::Up)
            } else {
                (CylinderPosition::new(pos.g, pos.zeta - 1), StepKind::Down)
            };
        }
        (CylinderPosition::new(u, pos.zeta), StepKind::Base)
    } else if k == d {
        (CylinderPosition::new(pos.g, pos.zeta + 1), StepKind::Up)
    } else {
        (CylinderPosition::new(pos.g, pos.zeta - 1), StepKind::Down)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    HitTarget,
    CapExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    pub positions: Vec<CylinderPosition>,
    pub stop_reason: StopReason,
    pub g_step_count: u64,
}

impl WalkTrace {
    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn excursions(&self, reference_layer: u64) -> Result<Vec<ExcursionRecord>, WalkError> {
        decompose_excursions(&self.positions, reference_layer)
    }
}

/// Walks from `start` until `stop` holds (tested before the first step)
/// or `cap` steps have been taken, recording every position.
pub fn run_until<R: Rng + ?Sized>(
    g: &RegularGraph,
    start: CylinderPosition,
    stop: impl Fn(CylinderPosition) -> bool,
    rng: &mut R,
    cap: u64,
) -> WalkTrace {
    let mut positions = vec![start];
    let mut pos = start;
    let mut g_steps = 0;
    let mut steps = 0;
    let reason = loop {
        if stop(pos) {
            break StopReason::HitTarget;
        }
        if steps == cap {
            break StopReason::CapExceeded;
        }
        let (next, kind) = step_with(g, pos, LoopSemantics::Stay, rng);
        g_steps += u64::from(kind == StepKind::Base);
        steps += 1;
        pos = next;
        positions.push(pos);
    };
    WalkTrace { positions, stop_reason: reason, g_step_count: g_steps }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("trace starts at layer {start}, not at the reference layer {reference}")]
    WrongStartLayer { start: u64, reference: u64 },
    #[error("positions {index} and {next} are not adjacent on the cylinder")]
    NotAdjacent { index: usize, next: usize },
    #[error("alpha must be at least 2, got {0}")]
    AlphaTooSmall(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
    /// A single base move on the reference layer, which returns at once.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcursionRecord {
    pub start_index: usize,
    pub end_index: usize,
    pub sign: Sign,
    /// Steps inside the excursion that stay on their layer.
    pub g_steps: u64,
}

impl ExcursionRecord {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Positive excursion with at least `alpha` base moves.
pub fn is_alpha_long(exc: &ExcursionRecord, alpha: f64) -> bool {
    exc.sign == Sign::Positive && exc.g_steps as f64 >= alpha
}

/// Mirror of [`is_alpha_long`] for excursions below the reference layer.
pub fn is_negative_alpha_long(exc: &ExcursionRecord, alpha: f64) -> bool {
    exc.sign == Sign::Negative && exc.g_steps as f64 >= alpha
}

/// Splits a trace at its returns to `reference_layer`. The segment after
/// the last return is incomplete and dropped.
pub fn decompose_excursions(
    positions: &[CylinderPosition],
    reference_layer: u64,
) -> Result<Vec<ExcursionRecord>, WalkError> {
    let Some(first) = positions.first() else {
        return Ok(Vec::new());
    };
    if first.zeta != reference_layer {
        return Err(WalkError::WrongStartLayer { start: first.zeta, reference: reference_layer });
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut g_steps = 0;
    for r in 1..positions.len() {
        let (prev, cur) = (positions[r - 1], positions[r]);
        if cur.zeta == prev.zeta {
            g_steps += 1;
        } else if cur.zeta.abs_diff(prev.zeta) != 1 || cur.g != prev.g {
            return Err(WalkError::NotAdjacent { index: r - 1, next: r });
        }
        if cur.zeta == reference_layer {
            let after = positions[start + 1].zeta;
            let sign = match after.cmp(&reference_layer) {
                std::cmp::Ordering::Greater => Sign::Positive,
                std::cmp::Ordering::Less => Sign::Negative,
                std::cmp::Ordering::Equal => Sign::Flat,
            };
            out.push(ExcursionRecord { start_index: start, end_index: r, sign, g_steps });
            start = r;
            g_steps = 0;
        }
    }
    Ok(out)
}

/// Running tally of excursions at one reference layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExcursionSummary {
    pub positive: u64,
    pub negative: u64,
    pub flat: u64,
    pub positive_alpha_long: u64,
    pub negative_alpha_long: u64,
}

impl ExcursionSummary {
    pub fn record(&mut self, sign: Sign, g_steps: u64, alpha: f64) {
        let long = g_steps as f64 >= alpha;
        match sign {
            Sign::Positive => {
                self.positive += 1;
                self.positive_alpha_long += u64::from(long);
            }
            Sign::Negative => {
                self.negative += 1;
                self.negative_alpha_long += u64::from(long);
            }
            Sign::Flat => self.flat += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.positive + self.negative + self.flat
    }

    pub fn of_records(records: &[ExcursionRecord], alpha: f64) -> Self {
        let mut s = Self::default();
        for r in records {
            s.record(r.sign, r.g_steps, alpha);
        }
        s
    }
}

/// `C(2n, n) / 4^n` for `n` up to this bound is tabulated; beyond it the
/// Stirling series is used.
const PASSAGE_TABLE_LEN: usize = 4096;
const MAX_HALF_PASSAGE: u64 = 1 << 61;

fn passage_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut q = Vec::with_capacity(PASSAGE_TABLE_LEN + 1);
        q.push(1.0f64);
        for n in 1..=PASSAGE_TABLE_LEN {
            let prev = q[n - 1];
            q.push(prev * (2 * n - 1) as f64 / (2 * n) as f64);
        }
        q
    })
}

/// `ln(C(2n, n) / 4^n)` from the Stirling series; accurate to about
/// `n^-5` relative for large `n`.
fn ln_half_passage_tail(n: f64) -> f64 {
    -0.5 * (std::f64::consts::PI * n).ln() - 1.0 / (8.0 * n) + 1.0 / (192.0 * n * n * n)
}

/// Number of steps a simple `+-1` walk needs to go from 1 to 0.
///
/// Uses `Pr[V >= 2n + 1] = C(2n, n) / 4^n` and inverts it for one uniform
/// draw. Values saturate at about `2^62`.
pub fn sample_first_passage<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let u = rng::open_unit(rng);
    let table = passage_table();
    let half = if u >= table[PASSAGE_TABLE_LEN] {
        // largest n with q_n >= u; q is decreasing
        table.partition_point(|&q| q >= u) as u64 - 1
    } else {
        let target = u.ln();
        let (mut lo, mut hi) = (PASSAGE_TABLE_LEN as u64, MAX_HALF_PASSAGE);
        if ln_half_passage_tail(hi as f64) >= target {
            lo = hi;
        }
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if ln_half_passage_tail(mid as f64) >= target {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    };
    2 * half + 1
}

/// Base moves made while `vertical` vertical moves happen, when each step
/// is vertical with probability `2 / (d + 2)`.
pub fn sample_base_moves<R: Rng + ?Sized>(vertical: u64, d: usize, rng: &mut R) -> u64 {
    if d == 0 {
        return 0;
    }
    let p = 2.0 / (d as f64 + 2.0);
    if vertical <= 256 {
        let geo = Geometric::new(p).expect("valid probability");
        return (0..vertical).map(|_| geo.sample(rng)).sum();
    }
    // negative binomial as a gamma mixture of Poissons
    let scale = (1.0 - p) / p;
    let lambda: f64 = Gamma::new(vertical as f64, scale).expect("positive shape").sample(rng);
    if lambda <= 1e15 {
        Poisson::new(lambda.max(f64::MIN_POSITIVE)).expect("finite rate").sample(rng) as u64
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (lambda + lambda.sqrt() * z).round().max(0.0) as u64
    }
}

/// Samples the endpoint of a `k`-step walk on the base graph, replacing
/// long walks by a draw from the stationary law of their parity class.
#[derive(Debug, Clone)]
pub struct BaseWalkSampler {
    /// Walks of at least this many steps are drawn uniformly.
    uniform_after: u64,
    colors: Option<Vec<u8>>,
    classes: [Vec<u32>; 2],
}

impl BaseWalkSampler {
    pub fn new(g: &RegularGraph) -> Self {
        let colors = g.bipartition();
        let profile = spectral::eigen_profile(g);
        let lambda = (profile.lambda_within_parity(colors.is_some()) + 1e-9).max(0.0);
        let uniform_after = if lambda >= 1.0 - 1e-12 || !g.is_connected() {
            u64::MAX
        } else if lambda <= 0.0 {
            1
        } else {
            let k = ((g.n() as f64 / UNIFORM_TOLERANCE).ln() / -lambda.ln()).ceil();
            (k as u64).max(1)
        };
        let mut classes = [Vec::new(), Vec::new()];
        match &colors {
            Some(c) => (0..g.n()).for_each(|v| classes[c[v] as usize].push(v as u32)),
            None => classes[0] = (0..g.n() as u32).collect(),
        }
        BaseWalkSampler { uniform_after, colors, classes }
    }

    pub fn uniform_after(&self) -> u64 {
        self.uniform_after
    }

    pub fn sample<R: Rng + ?Sized>(&self, g: &RegularGraph, start: usize, k: u64, rng: &mut R) -> usize {
        if k >= self.uniform_after {
            let class = match &self.colors {
                Some(c) => &self.classes[((c[start] as u64 + k) % 2) as usize],
                None => &self.classes[0],
            };
            return class[rng::index(rng, class.len())] as usize;
        }
        let mut v = start;
        for _ in 0..k {
            v = g.neighbor(v, rng::index(rng, g.degree()));
        }
        v
    }
}

/// A base graph with lazily built samplers for walks above the cluster.
#[derive(Debug)]
pub struct Cylinder {
    graph: RegularGraph,
    base_walk: OnceLock<BaseWalkSampler>,
}

impl Cylinder {
    pub fn new(graph: RegularGraph) -> Self {
        Cylinder { graph, base_walk: OnceLock::new() }
    }

    pub fn graph(&self) -> &RegularGraph {
        &self.graph
    }

    pub fn base_walk(&self) -> &BaseWalkSampler {
        self.base_walk.get_or_init(|| BaseWalkSampler::new(&self.graph))
    }

    /// Steps taken above layer `r` by a walk that has just moved from
    /// `(g, r)` to `(g, r + 1)`, until it is back on layer `r`. Returns the
    /// position on return, the vertical and the base moves of the
    /// excursion (the initial up move excluded).
    pub fn return_from_above<R: Rng + ?Sized>(&self, g: usize, r: u64, rng: &mut R) -> (CylinderPosition, u64, u64) {
        let vertical = sample_first_passage(rng);
        let base = sample_base_moves(vertical, self.graph.degree(), rng);
        let end = self.base_walk().sample(&self.graph, g, base, rng);
        (CylinderPosition::new(end, r), vertical, base)
    }
}

/// One excursion from the reference layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcursionSample {
    pub sign: Sign,
    pub g_steps: u64,
    pub total_steps: u64,
    pub capped: bool,
    /// The walk reached layer 0, where the half-line boundary acts.
    pub touched_floor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcursionMode {
    /// Step by step from layer `offset`, at most `cap` steps.
    Explicit { offset: u64, cap: u64 },
    /// Exact sampling on `G x Z` via the first-passage law.
    Exact,
}

impl Default for ExcursionMode {
    fn default() -> Self {
        ExcursionMode::Explicit { offset: DEFAULT_EXCURSION_OFFSET, cap: DEFAULT_STEP_CAP }
    }
}

pub fn sample_excursion<R: Rng + ?Sized>(cyl: &Cylinder, mode: ExcursionMode, rng: &mut R) -> ExcursionSample {
    let g = cyl.graph();
    match mode {
        ExcursionMode::Exact => {
            let d = g.degree();
            let k = rng::index(rng, d + 2);
            if k < d {
                return ExcursionSample { sign: Sign::Flat, g_steps: 1, total_steps: 1, capped: false, touched_floor: false };
            }
            let sign = if k == d { Sign::Positive } else { Sign::Negative };
            let vertical = sample_first_passage(rng);
            let base = sample_base_moves(vertical, d, rng);
            ExcursionSample {
                sign,
                g_steps: base,
                total_steps: (1 + vertical).saturating_add(base),
                capped: false,
                touched_floor: false,
            }
        }
        ExcursionMode::Explicit { offset, cap } => {
            let start = CylinderPosition::new(rng::index(rng, g.n()), offset);
            let (mut pos, kind) = step_with(g, start, LoopSemantics::Stay, rng);
            let sign = match kind {
                StepKind::Base => {
                    return ExcursionSample { sign: Sign::Flat, g_steps: 1, total_steps: 1, capped: false, touched_floor: false }
                }
                StepKind::Up => Sign::Positive,
                StepKind::Down => Sign::Negative,
            };
            let mut steps = 1;
            let mut g_steps = 0;
            let mut touched_floor = pos.zeta == 0;
            while pos.zeta != offset {
                if steps >= cap {
                    return ExcursionSample { sign, g_steps, total_steps: steps, capped: true, touched_floor };
                }
                let (next, kind) = step_with(g, pos, LoopSemantics::Stay, rng);
                g_steps += u64::from(kind == StepKind::Base);
                touched_floor |= next.zeta == 0;
                pos = next;
                steps += 1;
            }
            ExcursionSample { sign, g_steps, total_steps: steps, capped: false, touched_floor }
        }
    }
}

/// `1 / (12 (d + 2) sqrt(alpha))`, the lower bound on the chance that an
/// excursion is positive and `alpha`-long.
pub fn long_excursion_bound(d: usize, alpha: f64) -> f64 {
    1.0 / (12.0 * (d as f64 + 2.0) * alpha.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongExcursionReport {
    pub alpha: f64,
    pub positive: BoundCheck,
    /// Frequency of negative `alpha`-long excursions, for the symmetry
    /// check.
    pub negative: EstimateSummary,
    pub capped: u64,
    pub touched_floor: u64,
    pub samples: Vec<ExcursionSample>,
}

impl LongExcursionReport {
    /// Positive and negative frequencies within `sigmas` combined standard
    /// errors.
    pub fn symmetric_within(&self, sigmas: f64) -> bool {
        let p = &self.positive.estimate;
        let q = &self.negative;
        let se = (p.std_error.powi(2) + q.std_error.powi(2)).sqrt();
        (p.mean - q.mean).abs() <= sigmas * se
    }
}

/// Fraction of independent excursions that are positive and
/// `alpha`-long. Capped excursions count as not long.
pub fn long_excursion_frequency(
    cyl: &Cylinder,
    alpha: f64,
    trials: u64,
    seed: u64,
    mode: ExcursionMode,
) -> Result<LongExcursionReport, WalkError> {
    if !(alpha >= 2.0) {
        return Err(WalkError::AlphaTooSmall(alpha));
    }
    let mut rng = rng::from_seed(seed);
    let samples: Vec<ExcursionSample> = (0..trials).map(|_| sample_excursion(cyl, mode, &mut rng)).collect();
    let long = |s: &ExcursionSample, sign: Sign| !s.capped && s.sign == sign && s.g_steps as f64 >= alpha;
    let capped = samples.iter().filter(|s| s.capped).count() as u64;
    let pos = samples.iter().filter(|s| long(s, Sign::Positive)).count() as u64;
    let neg = samples.iter().filter(|s| long(s, Sign::Negative)).count() as u64;
    let touched_floor = samples.iter().filter(|s| s.touched_floor).count() as u64;
    let bound = long_excursion_bound(cyl.graph().degree(), alpha);
    Ok(LongExcursionReport {
        alpha,
        positive: BoundCheck::new(
            format!("Pr[positive {alpha}-long excursion] >= 1/(12(d+2)sqrt(alpha))"),
            bound,
            Direction::AtLeast,
            EstimateSummary::from_counts(pos, trials, capped),
        ),
        negative: EstimateSummary::from_counts(neg, trials, capped),
        capped,
        touched_floor,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(g: usize, z: u64) -> CylinderPosition {
        CylinderPosition::new(g, z)
    }

    #[test]
    fn step_options_on_c4() {
        let g = RegularGraph::cycle(4).unwrap();
        let mut rng = rng::from_seed(1);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..40_000 {
            *counts.entry(step(&g, pos(0, 3), &mut rng)).or_insert(0u32) += 1;
        }
        let keys: Vec<_> = counts.keys().copied().collect();
        assert_eq!(keys, vec![pos(0, 2), pos(0, 4), pos(1, 3), pos(3, 3)]);
        assert!(counts.values().all(|&c| (c as f64 - 10_000.0).abs() < 400.0));

        let mut bottom = std::collections::BTreeSet::new();
        for _ in 0..1000 {
            bottom.insert(step(&g, pos(0, 0), &mut rng));
        }
        assert_eq!(bottom.len(), 3);
        assert!(bottom.iter().all(|p| p.zeta <= 1));
    }

    #[test]
    fn loop_slot_stays() {
        let g = RegularGraph::cycle(4).unwrap().with_self_loops();
        let mut rng = rng::from_seed(2);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..2000 {
            seen.insert(step(&g, pos(0, 3), &mut rng));
        }
        assert_eq!(seen.len(), 5);
        assert!(seen.contains(&pos(0, 3)));
    }

    #[test]
    fn run_until_edges() {
        let g = RegularGraph::cycle(4).unwrap();
        let mut rng = rng::from_seed(3);
        let t = run_until(&g, pos(0, 1), |_| true, &mut rng, 10);
        assert_eq!((t.positions.len(), t.stop_reason), (1, StopReason::HitTarget));
        let t = run_until(&g, pos(0, 1), |_| false, &mut rng, 10);
        assert_eq!((t.positions.len(), t.stop_reason), (11, StopReason::CapExceeded));
        let t = run_until(&g, pos(0, 1), |p| p.zeta == 0, &mut rng, 1_000_000);
        assert_eq!(t.stop_reason, StopReason::HitTarget);
        assert_eq!(t.positions.last().unwrap().zeta, 0);
    }

    #[test]
    fn decomposition_examples() {
        let flat = [pos(0, 5), pos(1, 5), pos(2, 5)];
        let e = decompose_excursions(&flat, 5).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|x| x.sign == Sign::Flat && x.g_steps == 1));

        let updown = [pos(0, 5), pos(0, 6), pos(0, 5)];
        let e = decompose_excursions(&updown, 5).unwrap();
        assert_eq!(e, vec![ExcursionRecord { start_index: 0, end_index: 2, sign: Sign::Positive, g_steps: 0 }]);

        let wide = [pos(0, 5), pos(0, 6), pos(1, 6), pos(1, 5), pos(1, 4)];
        let e = decompose_excursions(&wide, 5).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].sign, e[0].g_steps), (Sign::Positive, 1));

        assert!(decompose_excursions(&wide, 4).is_err());
        assert!(decompose_excursions(&[pos(0, 5), pos(1, 6)], 5).is_err());
    }

    #[test]
    fn alpha_long_predicate() {
        let e = |sign, g_steps| ExcursionRecord { start_index: 0, end_index: 5, sign, g_steps };
        assert!(is_alpha_long(&e(Sign::Positive, 3), 2.0));
        assert!(!is_alpha_long(&e(Sign::Negative, 3), 2.0));
        assert!(is_negative_alpha_long(&e(Sign::Negative, 3), 2.0));
        assert!(is_alpha_long(&e(Sign::Positive, 0), 0.0));
        assert!(!is_alpha_long(&e(Sign::Flat, 1), 0.0));
    }

    #[test]
    fn first_passage_tail_matches_ballot() {
        let mut rng = rng::from_seed(4);
        let trials = 200_000;
        let samples: Vec<u64> = (0..trials).map(|_| sample_first_passage(&mut rng)).collect();
        assert!(samples.iter().all(|v| v % 2 == 1));
        for n in [1u64, 2, 5, 50, 2000, 10_000] {
            let q = if n as usize <= PASSAGE_TABLE_LEN {
                passage_table()[n as usize]
            } else {
                ln_half_passage_tail(n as f64).exp()
            };
            let freq = samples.iter().filter(|&&v| v >= 2 * n + 1).count() as f64 / trials as f64;
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            assert!((freq - q).abs() < 4.0 * se + 1e-9, "n={n}: {freq} vs {q}");
        }
    }

    #[test]
    fn stirling_series_continues_the_table() {
        let q = passage_table()[PASSAGE_TABLE_LEN];
        let s = ln_half_passage_tail(PASSAGE_TABLE_LEN as f64).exp();
        assert!((q - s).abs() / q < 1e-13);
    }

    #[test]
    fn base_move_counts_have_negative_binomial_mean() {
        let mut rng = rng::from_seed(5);
        for (v, d) in [(10u64, 2usize), (1000, 3)] {
            let trials = 20_000;
            let mean = (0..trials).map(|_| sample_base_moves(v, d, &mut rng) as f64).sum::<f64>() / trials as f64;
            let p = 2.0 / (d as f64 + 2.0);
            let expected = v as f64 * (1.0 - p) / p;
            let sd = (v as f64 * (1.0 - p)).sqrt() / p;
            assert!((mean - expected).abs() < 4.0 * sd / (trials as f64).sqrt(), "{mean} vs {expected}");
        }
    }

    #[test]
    fn base_walk_parity_and_uniform_switch() {
        let g = RegularGraph::hypercube(3).unwrap();
        let s = BaseWalkSampler::new(&g);
        assert!(s.uniform_after() < 1000);
        let colors = g.bipartition().unwrap();
        let mut rng = rng::from_seed(6);
        for k in [s.uniform_after(), s.uniform_after() + 1] {
            for _ in 0..100 {
                let v = s.sample(&g, 0, k, &mut rng);
                assert_eq!(colors[v] as u64, k % 2);
            }
        }
        let c = RegularGraph::cycle(5).unwrap();
        let s = BaseWalkSampler::new(&c);
        let mut hits = [0u32; 5];
        for _ in 0..50_000 {
            hits[s.sample(&c, 0, s.uniform_after(), &mut rng)] += 1;
        }
        assert!(hits.iter().all(|&h| (h as f64 - 10_000.0).abs() < 500.0));
    }

    #[test]
    fn explicit_and_exact_excursions_agree() {
        let cyl = Cylinder::new(RegularGraph::cycle(6).unwrap());
        let explicit = long_excursion_frequency(&cyl, 2.0, 40_000, 7, ExcursionMode::Explicit { offset: 1_000_000, cap: 1_000_000 }).unwrap();
        let exact = long_excursion_frequency(&cyl, 2.0, 40_000, 8, ExcursionMode::Exact).unwrap();
        let (a, b) = (&explicit.positive.estimate, &exact.positive.estimate);
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se, "{} vs {}", a.mean, b.mean);
        assert!(long_excursion_frequency(&cyl, 1.0, 10, 1, ExcursionMode::Exact).is_err());
    }
}
