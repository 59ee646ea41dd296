//! Cluster state for DLA on the cylinder: occupancy, boundary, particle
//! drops, loads and the per-particle observables.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::graph::RegularGraph;
use crate::rng;
use crate::stats::{chi_square_two_sample, BoundCheck, ChiSquareReport, Direction, EstimateSummary};
use crate::walk::{
    step_with, Cylinder, CylinderPosition, ExcursionSummary, LoopSemantics, Sign, StepKind, DEFAULT_STEP_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOptions {
    /// Cap on explicitly simulated steps per particle.
    pub cap: u64,
    /// Threshold for counting long excursions in [`ParticleOutcome`].
    pub alpha: f64,
    /// Replace each trip above the lowest empty layer by one exact sample
    /// of where and when the walk comes back. Off means every step is
    /// simulated.
    pub accelerate: bool,
    pub loops: LoopSemantics,
}

impl Default for DropOptions {
    fn default() -> Self {
        DropOptions { cap: DEFAULT_STEP_CAP, alpha: 2.0, accelerate: true, loops: LoopSemantics::Stay }
    }
}

impl DropOptions {
    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn explicit(mut self) -> Self {
        self.accelerate = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DlaError {
    #[error(
        "particle {t} exceeded the cap of {cap} simulated steps \
         (entry vertex {start_g}, {kappa} steps in total, layers {min_layer}..={max_layer})"
    )]
    CapExceeded { t: u64, cap: u64, start_g: usize, kappa: u64, min_layer: u64, max_layer: u64 },
    #[error("site ({layer}, {vertex}) is not adjacent to the cluster built so far")]
    Disconnected { layer: u64, vertex: usize },
    #[error("site ({layer}, {vertex}) is invalid or repeated")]
    BadSite { layer: u64, vertex: usize },
    #[error("synthetic load {m} must be in 1..={n}")]
    BadLoad { m: usize, n: usize },
    #[error("layer index must be at least 1")]
    BadLayer,
    #[error("base graphs have {a} and {b} vertices")]
    SizeMismatch { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleOutcome {
    pub t: u64,
    pub start_g: usize,
    /// Steps until sticking, jumps included.
    pub kappa: u64,
    /// Stick layer.
    pub h: u64,
    pub stick_g: usize,
    pub new_layer: bool,
    pub min_layer_visited: u64,
    /// Excursions at the entry layer, the trailing unfinished one dropped.
    pub excursions: ExcursionSummary,
    pub explicit_steps: u64,
    pub jumps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StickEvent {
    pub t: u64,
    pub vertex: usize,
    pub layer: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowUntil {
    Particles(u64),
    /// Until some particle sticks on this layer.
    Layer(u64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowthStats {
    /// `first_touch[m]` is `T_m`; entry 0 is 0.
    pub first_touch: Vec<u64>,
    /// `(layer, t)` whenever a layer fills up.
    pub wall_times: Vec<(u64, u64)>,
    pub h_histogram: BTreeMap<u64, u64>,
    /// Keyed by the bit length of `kappa` (0 for `kappa = 0`).
    pub kappa_histogram: BTreeMap<u32, u64>,
    pub loads: Vec<u64>,
    pub particles: u64,
    pub explicit_steps: u64,
    pub jumps: u64,
}

impl GrowthStats {
    pub fn t_m(&self, m: u64) -> Option<u64> {
        self.first_touch.get(m as usize).copied()
    }

    fn record(&mut self, o: &ParticleOutcome) {
        *self.h_histogram.entry(o.h).or_default() += 1;
        *self.kappa_histogram.entry(u64::BITS - o.kappa.leading_zeros()).or_default() += 1;
        self.particles += 1;
        self.explicit_steps += o.explicit_steps;
        self.jumps += o.jumps;
    }
}

#[derive(Debug, Clone)]
pub struct Cluster {
    cylinder: Arc<Cylinder>,
    words: usize,
    layers: Vec<Vec<u64>>,
    loads: Vec<u64>,
    m: u64,
    t: u64,
    first_touch: Vec<u64>,
    wall_times: Vec<(u64, u64)>,
    stick_log: Vec<StickEvent>,
}

struct Walked {
    start_g: usize,
    end: CylinderPosition,
    kappa: u64,
    explicit_steps: u64,
    jumps: u64,
    min_layer: u64,
    excursions: ExcursionSummary,
}

impl Cluster {
    /// The cluster `A_0`: layer 0 full, nothing above.
    pub fn new(cylinder: Arc<Cylinder>) -> Self {
        let n = cylinder.graph().n();
        let words = n.div_ceil(64);
        let mut layer0 = vec![u64::MAX; words];
        if n % 64 != 0 {
            layer0[words - 1] = (1u64 << (n % 64)) - 1;
        }
        Cluster {
            cylinder,
            words,
            layers: vec![layer0, vec![0; words], vec![0; words]],
            loads: vec![n as u64],
            m: 1,
            t: 0,
            first_touch: vec![0],
            wall_times: Vec::new(),
            stick_log: Vec::new(),
        }
    }

    pub fn from_graph(graph: RegularGraph) -> Self {
        Self::new(Arc::new(Cylinder::new(graph)))
    }

    /// Cluster whose particles stuck at `sites` (`(layer, vertex)`, layer
    /// at least 1) in the given order. Each site must touch the cluster
    /// built before it.
    pub fn from_sites(cylinder: Arc<Cylinder>, sites: &[(u64, usize)]) -> Result<Self, DlaError> {
        let mut c = Cluster::new(cylinder);
        let n = c.n();
        for &(layer, vertex) in sites {
            let pos = CylinderPosition::new(vertex, layer);
            if layer == 0 || vertex >= n || c.is_occupied(pos) {
                return Err(DlaError::BadSite { layer, vertex });
            }
            if !c.is_boundary(pos) {
                return Err(DlaError::Disconnected { layer, vertex });
            }
            c.stick(pos);
        }
        Ok(c)
    }

    /// `m` particles in each of layers `1..=j`, on vertices `0..m`, stacked
    /// column by column.
    pub fn synthetic(cylinder: Arc<Cylinder>, j: u64, m: usize) -> Result<Self, DlaError> {
        let n = cylinder.graph().n();
        if m == 0 || m > n {
            return Err(DlaError::BadLoad { m, n });
        }
        if j == 0 {
            return Err(DlaError::BadLayer);
        }
        let sites: Vec<(u64, usize)> = (1..=j).flat_map(|layer| (0..m).map(move |v| (layer, v))).collect();
        Self::from_sites(cylinder, &sites)
    }

    pub fn cylinder(&self) -> &Arc<Cylinder> {
        &self.cylinder
    }

    pub fn graph(&self) -> &RegularGraph {
        self.cylinder.graph()
    }

    pub fn n(&self) -> usize {
        self.graph().n()
    }

    /// Particles added since `A_0`.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `M`, the lowest empty layer.
    pub fn lowest_empty_layer(&self) -> u64 {
        self.m
    }

    pub fn stick_log(&self) -> &[StickEvent] {
        &self.stick_log
    }

    /// `T_m` for every layer reached so far, indexed by `m`.
    pub fn first_touch_times(&self) -> &[u64] {
        &self.first_touch
    }

    pub fn wall_times(&self) -> &[(u64, u64)] {
        &self.wall_times
    }

    /// `L(i)` for `i < M`.
    pub fn loads(&self) -> &[u64] {
        &self.loads
    }

    #[inline]
    pub fn is_occupied(&self, pos: CylinderPosition) -> bool {
        match self.layers.get(pos.zeta as usize) {
            Some(bits) => bits[pos.g / 64] >> (pos.g % 64) & 1 == 1,
            None => false,
        }
    }

    #[inline]
    fn occupied(&self, g: usize, zeta: u64) -> bool {
        self.is_occupied(CylinderPosition::new(g, zeta))
    }

    /// Vacant and adjacent to an occupied site. Loop slots do not make a
    /// site its own neighbor.
    #[inline]
    pub fn is_boundary(&self, pos: CylinderPosition) -> bool {
        let (g, z) = (pos.g, pos.zeta);
        if z > self.m || self.occupied(g, z) {
            return false;
        }
        (z > 0 && self.occupied(g, z - 1))
            || self.occupied(g, z + 1)
            || self.graph().neighbors(g).iter().any(|&u| u as usize != g && self.occupied(u as usize, z))
    }

    pub fn load(&self, i: u64) -> u64 {
        self.loads.get(i as usize).copied().unwrap_or(0)
    }

    /// `L(>= i)`.
    pub fn load_at_least(&self, i: u64) -> u64 {
        self.loads.iter().skip(i as usize).sum()
    }

    /// `L(<= i)`.
    pub fn load_upto(&self, i: u64) -> u64 {
        self.loads.iter().take(i as usize + 1).sum()
    }

    /// `D(m) = L(1) + ... + L(m)` divided by `m n`.
    pub fn density_upto(&self, m: u64) -> f64 {
        assert!(m >= 1, "density needs m >= 1");
        let filled: u64 = self.loads.iter().take(m as usize + 1).skip(1).sum();
        filled as f64 / (m as f64 * self.n() as f64)
    }

    /// Layers `i >= 1` with `L(i) = n`.
    pub fn detect_walls(&self) -> Vec<u64> {
        let n = self.n() as u64;
        (1..self.loads.len() as u64).filter(|&i| self.loads[i as usize] == n).collect()
    }

    /// No particle stuck strictly below a wall after the wall was
    /// completed.
    pub fn walls_block(&self) -> bool {
        self.wall_times
            .iter()
            .all(|&(layer, t)| self.stick_log.iter().filter(|e| e.t > t).all(|e| e.layer > layer))
    }

    /// Vacant boundary sites on layer `z`.
    pub fn boundary_count(&self, z: u64) -> usize {
        (0..self.n()).filter(|&g| self.is_boundary(CylinderPosition::new(g, z))).count()
    }

    /// Checks the structural invariants of the loads and occupancy.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.n() as u64;
        if self.load(0) != n {
            return Err(format!("L(0) = {} != n", self.load(0)));
        }
        if self.loads.len() as u64 != self.m {
            return Err(format!("{} load entries for M = {}", self.loads.len(), self.m));
        }
        if let Some(i) = (1..self.m).find(|&i| self.load(i) == 0) {
            return Err(format!("empty layer {i} below M = {}", self.m));
        }
        for (i, bits) in self.layers.iter().enumerate() {
            let count: u64 = bits.iter().map(|w| w.count_ones() as u64).sum();
            if count != self.load(i as u64) {
                return Err(format!("layer {i} holds {count} sites but L = {}", self.load(i as u64)));
            }
        }
        if self.loads.iter().sum::<u64>() != n + self.t {
            return Err("sum of loads != n + t".into());
        }
        Ok(())
    }

    fn ensure_layer(&mut self, z: u64) {
        while self.layers.len() as u64 <= z {
            self.layers.push(vec![0; self.words]);
        }
    }

    fn stick(&mut self, pos: CylinderPosition) -> bool {
        debug_assert!(self.is_boundary(pos));
        let z = pos.zeta;
        self.layers[z as usize][pos.g / 64] |= 1 << (pos.g % 64);
        self.t += 1;
        let new_layer = z == self.m;
        if new_layer {
            self.loads.push(0);
            self.m += 1;
            self.first_touch.push(self.t);
            self.ensure_layer(self.m + 1);
        }
        self.loads[z as usize] += 1;
        if self.loads[z as usize] == self.n() as u64 {
            self.wall_times.push((z, self.t));
        }
        self.stick_log.push(StickEvent { t: self.t, vertex: pos.g, layer: z });
        new_layer
    }

    fn walk_to_boundary<R: Rng + ?Sized>(&self, rng: &mut R, opts: &DropOptions) -> Result<Walked, DlaError> {
        let graph = self.graph();
        let reference = self.m;
        let start_g = rng::index(rng, graph.n());
        let mut pos = CylinderPosition::new(start_g, reference);
        let (mut kappa, mut explicit, mut jumps) = (0u64, 0u64, 0u64);
        let (mut min_layer, mut max_layer) = (reference, reference);
        let mut excursions = ExcursionSummary::default();
        // sign and base moves of the excursion in progress
        let mut open: Option<(Sign, u64)> = None;

        while !self.is_boundary(pos) {
            if explicit >= opts.cap {
                return Err(DlaError::CapExceeded {
                    t: self.t + 1,
                    cap: opts.cap,
                    start_g,
                    kappa,
                    min_layer,
                    max_layer,
                });
            }
            let (next, kind) = step_with(graph, pos, opts.loops, rng);
            debug_assert!(!self.is_occupied(next), "walk entered the cluster at {next:?}");
            explicit += 1;
            kappa += 1;
            min_layer = min_layer.min(next.zeta);
            max_layer = max_layer.max(next.zeta);

            if pos.zeta == reference {
                match kind {
                    StepKind::Base => excursions.record(Sign::Flat, 1, opts.alpha),
                    StepKind::Up => open = Some((Sign::Positive, 0)),
                    StepKind::Down => open = Some((Sign::Negative, 0)),
                }
            } else if let Some((_, g_steps)) = open.as_mut() {
                *g_steps += u64::from(kind == StepKind::Base);
            }
            pos = next;

            if opts.accelerate && pos.zeta == reference + 1 {
                let (back, vertical, base) = self.cylinder.return_from_above(pos.g, reference, rng);
                kappa = kappa.saturating_add(vertical).saturating_add(base);
                jumps += 1;
                if let Some((_, g_steps)) = open.as_mut() {
                    *g_steps = g_steps.saturating_add(base);
                }
                pos = back;
            }
            if pos.zeta == reference {
                if let Some((sign, g_steps)) = open.take() {
                    excursions.record(sign, g_steps, opts.alpha);
                }
            }
        }
        Ok(Walked { start_g, end: pos, kappa, explicit_steps: explicit, jumps, min_layer, excursions })
    }

    fn outcome(&self, w: Walked, t: u64) -> ParticleOutcome {
        ParticleOutcome {
            t,
            start_g: w.start_g,
            kappa: w.kappa,
            h: w.end.zeta,
            stick_g: w.end.g,
            new_layer: w.end.zeta == self.m,
            min_layer_visited: w.min_layer,
            excursions: w.excursions,
            explicit_steps: w.explicit_steps,
            jumps: w.jumps,
        }
    }

    /// Adds one particle: it enters at a uniform vertex of layer `M` and
    /// sticks at the first boundary site it visits (possibly the entry
    /// site). On error the cluster is unchanged.
    pub fn drop_particle<R: Rng + ?Sized>(&mut self, rng: &mut R, opts: &DropOptions) -> Result<ParticleOutcome, DlaError> {
        let w = self.walk_to_boundary(rng, opts)?;
        let out = self.outcome(w, self.t + 1);
        let new_layer = self.stick(CylinderPosition::new(out.stick_g, out.h));
        debug_assert_eq!(new_layer, out.new_layer);
        Ok(out)
    }

    /// Where the next particle would stick, leaving the cluster untouched.
    pub fn probe<R: Rng + ?Sized>(&self, rng: &mut R, opts: &DropOptions) -> Result<ParticleOutcome, DlaError> {
        let w = self.walk_to_boundary(rng, opts)?;
        Ok(self.outcome(w, self.t + 1))
    }

    pub fn grow<R: Rng + ?Sized>(&mut self, until: GrowUntil, rng: &mut R, opts: &DropOptions) -> Result<GrowthStats, DlaError> {
        self.grow_with(until, rng, opts, |_| {})
    }

    /// [`Cluster::grow`], reporting each particle to `on_drop`.
    pub fn grow_with<R: Rng + ?Sized>(
        &mut self,
        until: GrowUntil,
        rng: &mut R,
        opts: &DropOptions,
        mut on_drop: impl FnMut(&ParticleOutcome),
    ) -> Result<GrowthStats, DlaError> {
        let mut stats = GrowthStats::default();
        let done = |c: &Cluster, dropped: u64| match until {
            GrowUntil::Particles(b) => dropped >= b,
            GrowUntil::Layer(m) => c.m > m,
        };
        let mut dropped = 0;
        while !done(self, dropped) {
            let o = self.drop_particle(rng, opts)?;
            stats.record(&o);
            on_drop(&o);
            dropped += 1;
        }
        stats.first_touch = self.first_touch.clone();
        stats.wall_times = self.wall_times.clone();
        stats.loads = self.loads.clone();
        Ok(stats)
    }
}

/// Frequency with which a particle dropped on the synthetic cluster with
/// `m` particles per layer in layers `1..=j` sticks at layer `j + 1` or
/// higher, checked against `m / n`.
pub fn stick_above_frequency(
    cylinder: &Arc<Cylinder>,
    j: u64,
    m: usize,
    trials: u64,
    seed: u64,
    opts: &DropOptions,
) -> Result<BoundCheck, DlaError> {
    let cluster = Cluster::synthetic(cylinder.clone(), j, m)?;
    let mut rng = rng::from_seed(seed);
    let mut hits = 0;
    for _ in 0..trials {
        hits += u64::from(cluster.probe(&mut rng, opts)?.h > j);
    }
    let n = cylinder.graph().n();
    Ok(BoundCheck::new(
        format!("Pr[stick at layer >= {}] >= m/n (m={m})", j + 1),
        m as f64 / n as f64,
        Direction::AtLeast,
        EstimateSummary::from_counts(hits, trials, 0),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryVisitReport {
    /// Mean number of distinct base vertices seen before the first
    /// vertical move, against `(2d + 2) / (d + 2)`.
    pub mean_size: BoundCheck,
    /// `Pr[|S| = 1]`; equals `2 / (d + 2)` on loopless graphs.
    pub immediate_leave: EstimateSummary,
    pub immediate_leave_exact: f64,
}

/// Simulates the entry walk until it first leaves its layer and records
/// the number of distinct base vertices visited.
pub fn entry_layer_visit_set(graph: &RegularGraph, trials: u64, seed: u64) -> EntryVisitReport {
    let mut rng = rng::from_seed(seed);
    let d = graph.degree();
    let mut stamp = vec![u64::MAX; graph.n()];
    let mut sizes = Vec::with_capacity(trials as usize);
    let mut singles = 0;
    for trial in 0..trials {
        let mut g = rng::index(&mut rng, graph.n());
        stamp[g] = trial;
        let mut size = 1u64;
        loop {
            let k = rng::index(&mut rng, d + 2);
            if k >= d {
                break;
            }
            g = graph.neighbor(g, k);
            if stamp[g] != trial {
                stamp[g] = trial;
                size += 1;
            }
        }
        singles += u64::from(size == 1);
        sizes.push(size as f64);
    }
    EntryVisitReport {
        mean_size: BoundCheck::new(
            "E|S| >= (2d+2)/(d+2)",
            (2.0 * d as f64 + 2.0) / (d as f64 + 2.0),
            Direction::AtLeast,
            EstimateSummary::from_samples(&sizes, 0),
        ),
        immediate_leave: EstimateSummary::from_counts(singles, trials, 0),
        immediate_leave_exact: 2.0 / (d as f64 + 2.0),
    }
}

/// One process in [`loop_equivalence_check`].
#[derive(Debug, Clone)]
pub struct ProcessSide {
    pub cylinder: Arc<Cylinder>,
    pub opts: DropOptions,
    pub seed: u64,
}

/// Stick-layer sequences `(H(1), ..., H(particles))` of `trials`
/// independent processes; trial `i` uses stream `i` of `seed`.
pub fn stick_layer_sequences(side: &ProcessSide, particles: u64, trials: u64) -> Result<BTreeMap<Vec<u64>, u64>, DlaError> {
    let mut counts = BTreeMap::new();
    for trial in 0..trials {
        let mut rng = rng::split(side.seed, trial);
        let mut cluster = Cluster::new(side.cylinder.clone());
        let mut key = Vec::with_capacity(particles as usize);
        for _ in 0..particles {
            key.push(cluster.drop_particle(&mut rng, &side.opts)?.h);
        }
        *counts.entry(key).or_default() += 1;
    }
    Ok(counts)
}

/// Two-sample chi-square test on the stick-layer sequences of two
/// processes whose base graphs have the same vertex count.
pub fn loop_equivalence_check(
    a: &ProcessSide,
    b: &ProcessSide,
    particles: u64,
    trials: u64,
) -> Result<ChiSquareReport, DlaError> {
    let (na, nb) = (a.cylinder.graph().n(), b.cylinder.graph().n());
    if na != nb {
        return Err(DlaError::SizeMismatch { a: na, b: nb });
    }
    let ca = stick_layer_sequences(a, particles, trials)?;
    let cb = stick_layer_sequences(b, particles, trials)?;
    Ok(chi_square_two_sample(&ca, &cb))
}

/// `(d + 2)^-(n - 1) n^-n`, the lower bound on completing a wall within
/// the next `n` particles.
pub fn wall_window_bound(n: usize, d: usize) -> f64 {
    (-((n as f64 - 1.0) * (d as f64 + 2.0).ln() + n as f64 * (n as f64).ln())).exp()
}

/// Frequency with which `n` more particles dropped on `state` complete a
/// new wall.
pub fn wall_window_frequency(state: &Cluster, trials: u64, seed: u64, opts: &DropOptions) -> Result<BoundCheck, DlaError> {
    let n = state.n();
    let before = state.detect_walls().len();
    let mut hits = 0;
    for trial in 0..trials {
        let mut rng = rng::split(seed, trial);
        let mut c = state.clone();
        c.grow(GrowUntil::Particles(n as u64), &mut rng, opts)?;
        hits += u64::from(c.detect_walls().len() > before);
    }
    Ok(BoundCheck::new(
        "Pr[new wall within n particles] >= (d+2)^-(n-1) n^-n",
        wall_window_bound(n, state.graph().degree()),
        Direction::AtLeast,
        EstimateSummary::from_counts(hits, trials, 0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Verdict;

    fn cyl(g: RegularGraph) -> Arc<Cylinder> {
        Arc::new(Cylinder::new(g))
    }

    #[test]
    fn fresh_cluster() {
        let c = Cluster::from_graph(RegularGraph::cycle(4).unwrap());
        assert_eq!((c.load(0), c.lowest_empty_layer(), c.t()), (4, 1, 0));
        assert_eq!(c.loads().iter().sum::<u64>(), 4);
        assert_eq!(c.density_upto(1), 0.0);
        assert_eq!(c.load_at_least(1), 0);
        assert!(c.detect_walls().is_empty());
        assert!(c.is_boundary(CylinderPosition::new(2, 1)));
        assert!(!c.is_boundary(CylinderPosition::new(2, 2)));
        assert!(!c.is_boundary(CylinderPosition::new(2, 0)));
        c.check_invariants().unwrap();
    }

    #[test]
    fn layer_zero_bits_for_wide_graphs() {
        let c = Cluster::from_graph(RegularGraph::cycle(130).unwrap());
        c.check_invariants().unwrap();
        assert!(c.is_occupied(CylinderPosition::new(129, 0)));
    }

    #[test]
    fn first_particle_sticks_at_entry() {
        let mut c = Cluster::from_graph(RegularGraph::complete(5).unwrap());
        let mut rng = rng::from_seed(1);
        let o = c.drop_particle(&mut rng, &DropOptions::default()).unwrap();
        assert_eq!((o.kappa, o.h, o.new_layer), (0, 1, true));
        assert_eq!(c.first_touch_times(), &[0, 1]);
    }

    #[test]
    fn particle_above_stuck_site_sticks_at_once() {
        let c = Cluster::from_sites(cyl(RegularGraph::cycle(4).unwrap()), &[(1, 2)]).unwrap();
        assert!(c.is_boundary(CylinderPosition::new(2, 2)));
        assert_eq!(c.lowest_empty_layer(), 2);
    }

    #[test]
    fn growth_keeps_invariants() {
        for (g, seed) in [(RegularGraph::cycle(8).unwrap(), 1), (RegularGraph::torus(3, 2).unwrap().with_self_loops(), 2)] {
            let mut c = Cluster::from_graph(g);
            let mut rng = rng::from_seed(seed);
            let opts = DropOptions::default();
            let mut before = c.loads().to_vec();
            for _ in 0..300 {
                let m_before = c.lowest_empty_layer();
                let at_least_2 = c.load_at_least(2);
                let o = c.drop_particle(&mut rng, &opts).unwrap();
                assert_eq!(o.new_layer, o.h == m_before);
                assert!(o.h >= 1);
                assert_eq!(c.load_at_least(2), at_least_2 + u64::from(o.h >= 2));
                c.check_invariants().unwrap();
                assert!(before.iter().zip(c.loads()).all(|(a, b)| a <= b));
                before = c.loads().to_vec();
            }
            assert_eq!(c.load_at_least(1), 300);
            assert!(c.load_upto(3) <= 300 + c.n() as u64);
            assert!(c.walls_block());
            assert!(c.first_touch_times().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn stick_log_is_connected() {
        let mut c = Cluster::from_graph(RegularGraph::cycle(6).unwrap());
        let mut rng = rng::from_seed(9);
        c.grow(GrowUntil::Particles(200), &mut rng, &DropOptions::default()).unwrap();
        let sites: Vec<(u64, usize)> = c.stick_log().iter().map(|e| (e.layer, e.vertex)).collect();
        let rebuilt = Cluster::from_sites(c.cylinder().clone(), &sites).unwrap();
        assert_eq!(rebuilt.loads(), c.loads());
    }

    #[test]
    fn growth_is_deterministic() {
        let run = |accelerate| {
            let mut c = Cluster::from_graph(RegularGraph::cycle(8).unwrap());
            let mut rng = rng::from_seed(3);
            let opts = DropOptions { accelerate, ..DropOptions::default() };
            c.grow(GrowUntil::Particles(100), &mut rng, &opts).unwrap();
            c.stick_log().to_vec()
        };
        assert_eq!(run(true), run(true));
        assert_eq!(run(false), run(false));
    }

    #[test]
    fn grow_until_layer() {
        let mut c = Cluster::from_graph(RegularGraph::cycle(8).unwrap());
        let mut rng = rng::from_seed(4);
        let s = c.grow(GrowUntil::Layer(1), &mut rng, &DropOptions::default()).unwrap();
        assert_eq!(s.particles, 1);
        let s = c.grow(GrowUntil::Particles(50), &mut rng, &DropOptions::default()).unwrap();
        assert_eq!(c.t(), 51);
        assert_eq!(s.h_histogram.values().sum::<u64>(), 50);
        assert_eq!(c.loads().iter().sum::<u64>(), 8 + 51);
    }

    #[test]
    fn tiny_cap_aborts_without_changing_the_cluster() {
        let mut c = Cluster::from_sites(cyl(RegularGraph::cycle(8).unwrap()), &[(1, 0)]).unwrap();
        let mut rng = rng::from_seed(5);
        let opts = DropOptions::default().with_cap(1);
        let mut aborted = false;
        for _ in 0..50 {
            let before = c.clone();
            match c.drop_particle(&mut rng, &opts) {
                Err(DlaError::CapExceeded { .. }) => {
                    assert_eq!(c.loads(), before.loads());
                    aborted = true;
                    break;
                }
                Ok(_) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(aborted);
    }

    #[test]
    fn density_examples() {
        let k3 = cyl(RegularGraph::complete(3).unwrap());
        let one = Cluster::from_sites(k3.clone(), &[(1, 0)]).unwrap();
        assert!((one.density_upto(1) - 1.0 / 3.0).abs() < 1e-15);
        let full = Cluster::synthetic(k3, 2, 3).unwrap();
        assert_eq!(full.density_upto(2), 1.0);
        assert_eq!(full.detect_walls(), vec![1, 2]);
    }

    #[test]
    fn synthetic_rejections() {
        let k4 = cyl(RegularGraph::complete(4).unwrap());
        assert!(matches!(Cluster::synthetic(k4.clone(), 2, 0), Err(DlaError::BadLoad { .. })));
        assert!(matches!(Cluster::synthetic(k4.clone(), 2, 5), Err(DlaError::BadLoad { .. })));
        assert!(matches!(Cluster::from_sites(k4.clone(), &[(2, 0)]), Err(DlaError::Disconnected { .. })));
        assert!(matches!(Cluster::from_sites(k4, &[(1, 0), (1, 0)]), Err(DlaError::BadSite { .. })));
    }

    #[test]
    fn wall_on_k3() {
        let k3 = cyl(RegularGraph::complete(3).unwrap());
        let c = Cluster::from_sites(k3, &[(1, 0), (1, 1), (1, 2)]).unwrap();
        assert_eq!(c.detect_walls(), vec![1]);
        assert_eq!(c.wall_times(), &[(1, 3)]);
    }

    #[test]
    fn full_synthetic_load_always_sticks_above() {
        let k4 = cyl(RegularGraph::complete(4).unwrap());
        let r = stick_above_frequency(&k4, 2, 4, 200, 1, &DropOptions::default()).unwrap();
        assert_eq!(r.estimate.mean, 1.0);
        let c = Cluster::synthetic(k4, 2, 4).unwrap();
        let mut rng = rng::from_seed(2);
        assert_eq!(c.probe(&mut rng, &DropOptions::default()).unwrap().kappa, 0);
    }

    #[test]
    fn entry_visit_set() {
        let r = entry_layer_visit_set(&RegularGraph::cycle(10).unwrap(), 20_000, 3);
        assert!(r.mean_size.estimate.mean >= 1.0);
        assert_eq!(r.immediate_leave_exact, 0.5);
        assert!((r.immediate_leave.mean - 0.5).abs() < 4.0 * r.immediate_leave.std_error);
        assert_eq!(r.mean_size.bound_value, 1.5);
        assert_ne!(r.mean_size.verdict, Verdict::Fail);
    }

    #[test]
    fn identical_processes_give_p_one() {
        let side = ProcessSide { cylinder: cyl(RegularGraph::complete(3).unwrap()), opts: DropOptions::default(), seed: 4 };
        let r = loop_equivalence_check(&side, &side, 5, 300).unwrap();
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn wall_window_bound_value() {
        assert!((wall_window_bound(3, 2) - 1.0 / 432.0).abs() < 1e-15);
    }

    #[test]
    fn excursions_are_counted_at_the_entry_layer() {
        let mut c = Cluster::from_graph(RegularGraph::cycle(12).unwrap());
        let mut rng = rng::from_seed(8);
        let opts = DropOptions::default().explicit();
        let mut total = ExcursionSummary::default();
        c.grow_with(GrowUntil::Particles(400), &mut rng, &opts, |o| {
            total.positive += o.excursions.positive;
            total.negative += o.excursions.negative;
            total.flat += o.excursions.flat;
        })
        .unwrap();
        assert!(total.positive > 0 && total.negative > 0 && total.flat > 0);
    }
}
