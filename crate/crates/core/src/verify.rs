//! Self-check suites: exact identities, spectral facts and cluster
//! invariants, each reported as one PASS/FAIL line.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dla::{self, Cluster, DropOptions, GrowUntil};
use crate::experiment;
use crate::graph::{self, RegularGraph};
use crate::rng;
use crate::snapshot::Snapshot;
use crate::spectral;
use crate::walk::Cylinder;
use crate::walk1d::{self, Walk1dError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, details: impl Into<String>) -> Self {
        CheckLine { name: name.into(), passed, details: details.into() }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} {}", self.name, self.details)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Walk1d,
    Spectral,
    Dla,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "walk1d" => Ok(Suite::Walk1d),
            "spectral" => Ok(Suite::Spectral),
            "dla" => Ok(Suite::Dla),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite '{other}' (expected walk1d, spectral, dla or all)")),
        }
    }
}

pub fn run(suite: Suite, seed: u64) -> Vec<CheckLine> {
    match suite {
        Suite::Walk1d => walk1d_suite(),
        Suite::Spectral => spectral_suite(seed),
        Suite::Dla => dla_suite(seed),
        Suite::All => {
            let mut out = walk1d_suite();
            out.extend(spectral_suite(seed));
            out.extend(dla_suite(seed));
            out
        }
    }
}

pub fn walk1d_suite() -> Vec<CheckLine> {
    walk1d_suite_with(&walk1d::ballot_probability)
}

type BallotFn = dyn Fn(u32) -> Result<BigRational, Walk1dError>;

/// The one-dimensional suite with a replaceable ballot formula, so tests
/// can confirm that a wrong formula is caught.
pub fn walk1d_suite_with(ballot: &BallotFn) -> Vec<CheckLine> {
    let mut out = Vec::new();

    let mut bad = Vec::new();
    for n in 1..=10u32 {
        let exact = walk1d::enumerate_simple(2 * n, walk1d::all_nonnegative).expect("within cap");
        if ballot(n).ok() != Some(exact) {
            bad.push(n);
        }
    }
    out.push(CheckLine::new("ballot-vs-enumeration", bad.is_empty(), format!("n=1..10 mismatches={bad:?}")));

    let mut bad = Vec::new();
    for n in 1..=10u32 {
        for m in 1..=n {
            let exact = walk1d::enumerate_simple(2 * n, |s| walk1d::zeros(s) < m as usize).expect("within cap");
            if walk1d::zero_count_cdf(n, m).ok() != Some(exact) {
                bad.push((n, m));
            }
        }
    }
    out.push(CheckLine::new("zero-cdf-vs-enumeration", bad.is_empty(), format!("n=1..10 m=1..n mismatches={bad:?}")));

    let monotone = (1..=32u32).all(|n| {
        let cdf: Vec<BigRational> = (1..=n).map(|m| walk1d::zero_count_cdf(n, m).unwrap()).collect();
        cdf.windows(2).all(|w| w[0] <= w[1])
    });
    out.push(CheckLine::new("zero-cdf-monotone-in-m", monotone, "n=1..32"));

    let mut worst = f64::INFINITY;
    let mut ok = true;
    for n in 2..=32u32 {
        for m in 1..n {
            let p = walk1d::to_f64(&walk1d::zero_count_cdf(n, m).unwrap());
            let b = walk1d::zero_count_stirling_bound(n, m).unwrap();
            ok &= p < b;
            worst = worst.min(b - p);
        }
    }
    out.push(CheckLine::new("zero-cdf-below-m-over-sqrt", ok, format!("n=2..32 m<n min_margin={worst:.6}")));

    let (ok, detail) = central_binomial_step(2..=16);
    out.push(CheckLine::new("central-binomial-excursion-step", ok, detail));

    let lazy = walk1d::LazyWalkParams::new(0.5).expect("valid");
    let p = walk1d::enumerate_lazy(lazy, 12, |_| true).unwrap();
    out.push(CheckLine::new("lazy-enumeration-normalized", (p - 1.0).abs() < 1e-12, format!("total={p:.15}")));

    let t = walk1d::lazy_max_tail(walk1d::LazyWalkParams::new(1.0).unwrap(), 4, 4.0).unwrap();
    let exact = walk1d::enumerate_simple(4, |s| s.iter().any(|x| x.abs() as f64 >= t.threshold)).unwrap();
    let exact = walk1d::to_f64(&exact);
    out.push(CheckLine::new(
        "max-tail-example",
        exact == 0.125 && exact <= t.bound,
        format!("exact={exact} bound={}", t.bound),
    ));

    let mut ok = true;
    for alpha in [0.25, 0.5, 1.0] {
        let mut prev = 0.0;
        for eps in [0.9, 0.5, 0.1, 0.01] {
            let c = walk1d::zeros_constant(alpha, eps).unwrap();
            ok &= c > 4.0 / alpha && c >= prev && walk1d::zeros_inequality_lhs(alpha, c) <= eps;
            prev = c;
        }
    }
    out.push(CheckLine::new("zeros-constant-properties", ok, "C > 4/alpha, non-increasing in eps"));
    out
}

/// `2^-a' C(a', a'/2) > 1 / (3 sqrt(alpha))` with `a' = 8 ceil(alpha / 2)`,
/// for integer `alpha`, compared exactly as `9 alpha q^2 > 1`.
pub fn central_binomial_step(alphas: std::ops::RangeInclusive<u32>) -> (bool, String) {
    let mut failures = Vec::new();
    let mut tightest = (0u32, f64::INFINITY);
    for alpha in alphas.clone() {
        let half = 4 * alpha.div_ceil(2);
        let q = walk1d::ballot_probability(half).expect("within range");
        let lhs = &q * &q * BigRational::from_integer(BigInt::from(9 * alpha));
        if lhs <= BigRational::from_integer(BigInt::from(1)) {
            failures.push(alpha);
        }
        let ratio = lhs.to_f64().unwrap_or(f64::NAN).sqrt();
        if ratio < tightest.1 {
            tightest = (alpha, ratio);
        }
    }
    (
        failures.is_empty(),
        format!(
            "alpha={}..={} failures={failures:?} tightest alpha={} ratio={:.6}",
            alphas.start(),
            alphas.end(),
            tightest.0,
            tightest.1
        ),
    )
}

/// `count` random families of `len` vertex sets on `n` vertices.
pub fn random_set_families<R: Rng + ?Sized>(n: usize, count: usize, len: usize, rng: &mut R) -> Vec<Vec<Vec<usize>>> {
    (0..count)
        .map(|_| {
            (0..len)
                .map(|_| {
                    let size = rng::index(rng, n + 1);
                    let mut all: Vec<usize> = (0..n).collect();
                    all.shuffle(rng);
                    let mut set = all[..size].to_vec();
                    set.sort_unstable();
                    set
                })
                .collect()
        })
        .collect()
}

pub fn spectral_suite(seed: u64) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;

    let p = spectral::eigen_profile(&RegularGraph::complete(4).unwrap());
    let ok = close(p.eigenvalues[0], 1.0) && p.eigenvalues[1..].iter().all(|&x| close(x, -1.0 / 3.0));
    out.push(CheckLine::new("complete-4-spectrum", ok, format!("lambda={:.9}", p.lambda)));

    let c9 = spectral::eigen_profile(&RegularGraph::cycle(9).unwrap());
    let mut expected: Vec<f64> = (0..9).map(|k| (2.0 * std::f64::consts::PI * k as f64 / 9.0).cos()).collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    let ok = c9.eigenvalues.iter().zip(&expected).all(|(a, b)| close(*a, *b));
    out.push(CheckLine::new("cycle-9-spectrum", ok, format!("lambda={:.9}", c9.lambda)));

    let q3 = spectral::eigen_profile(&RegularGraph::hypercube(3).unwrap());
    out.push(CheckLine::new("bipartite-lambda-one", close(q3.lambda, 1.0), format!("lambda={:.9}", q3.lambda)));

    let looped = RegularGraph::torus(3, 2).unwrap().with_self_loops().with_self_loops();
    let lp = spectral::eigen_profile(&looped);
    let trace = looped.total_loops() as f64 / looped.degree() as f64;
    let sum: f64 = lp.eigenvalues.iter().sum();
    out.push(CheckLine::new("trace-identity-with-loops", (sum - trace).abs() < 1e-6, format!("sum={sum:.9} trace={trace:.9}")));

    let rr = graph::from_spec("random:30:3:seed=4").unwrap();
    let dense = spectral::eigen_profile(&rr);
    let power = spectral::eigen_profile_with_limit(&rr, 1);
    out.push(CheckLine::new(
        "power-iteration-matches-dense",
        (dense.lambda - power.lambda).abs() < 1e-6,
        format!("dense={:.9} power={:.9}", dense.lambda, power.lambda),
    ));

    let m = spectral::mixing_time(&RegularGraph::complete(3).unwrap(), 100);
    out.push(CheckLine::new("mixing-time-k3", m == Ok(spectral::MixingTime::Steps(1)), format!("{m:?}")));

    let k3 = RegularGraph::complete(3).unwrap();
    let lam = spectral::eigen_profile(&k3).lambda;
    let counts: Vec<String> = [vec![vec![0, 1, 2]], vec![vec![]], vec![vec![0], vec![1]]]
        .iter()
        .map(|sets| spectral::count_constrained_paths(&k3, lam, sets).map(|r| r.count.to_string()).unwrap_or_default())
        .collect();
    out.push(CheckLine::new("path-count-examples", counts == ["6", "0", "2"], format!("counts={counts:?}")));

    let mut rng = rng::from_seed(seed);
    let mut worst_ratio = 0.0f64;
    let mut freq_ok = true;
    let mut violations = 0;
    for spec in ["complete:4", "cycle:5", "random:10:3:seed=1"] {
        let g = graph::from_spec(spec).unwrap();
        let lambda = spectral::eigen_profile(&g).lambda;
        for sets in random_set_families(g.n(), 20, 6, &mut rng) {
            match spectral::count_constrained_paths(&g, lambda, &sets) {
                Ok(r) => worst_ratio = worst_ratio.max(r.count.to_f64().unwrap_or(0.0) / r.bound),
                Err(_) => violations += 1,
            }
            let fractions: Vec<f64> = sets.iter().map(|s| s.len() as f64 / g.n() as f64).collect();
            let bound = spectral::avoidance_bound(lambda, &fractions).unwrap();
            let est = spectral::avoidance_frequency(&g, &sets, 2000, &mut rng).unwrap();
            freq_ok &= est.mean <= bound + 3.0 * est.std_error;
        }
    }
    out.push(CheckLine::new(
        "path-count-spectral-bound",
        violations == 0,
        format!("families=60 violations={violations} max_count_over_bound={worst_ratio:.6}"),
    ));
    out.push(CheckLine::new("avoidance-frequency-bound", freq_ok, "families=60 trials=2000"));
    out
}

pub fn dla_suite(seed: u64) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let opts = DropOptions::default();
    let cyl = |s: &str| Arc::new(Cylinder::new(graph::from_spec(s).unwrap()));

    let mut ok = true;
    for (i, spec) in ["cycle:8", "complete:5", "torus:3x3", "hypercube:3"].iter().enumerate() {
        let c = Cluster::new(cyl(spec));
        let mut rng = rng::split(seed, i as u64);
        for _ in 0..100 {
            let mut fresh = c.clone();
            let o = fresh.drop_particle(&mut rng, &opts).unwrap();
            ok &= o.kappa == 0 && o.h == 1 && fresh.first_touch_times()[1] == 1;
        }
    }
    out.push(CheckLine::new("first-particle-sticks-at-layer-one", ok, "4 bases x 100 drops"));

    let mut c = Cluster::new(cyl("cycle:8"));
    let mut rng = rng::split(seed, 10);
    let grown = c.grow(GrowUntil::Particles(500), &mut rng, &opts);
    let inv = grown.is_ok() && c.check_invariants().is_ok();
    out.push(CheckLine::new("cluster-invariants", inv, format!("cycle:8 t={} M={}", c.t(), c.lowest_empty_layer())));
    out.push(CheckLine::new("walls-block-passage", c.walls_block(), format!("walls={}", c.detect_walls().len())));
    let monotone = c.first_touch_times().windows(2).all(|w| w[0] < w[1]);
    out.push(CheckLine::new("first-touch-strictly-increasing", monotone, format!("layers={}", c.first_touch_times().len() - 1)));

    let text = Snapshot::from_cluster(&c).to_text();
    let round = Snapshot::parse(&text).map(|s| s.to_text() == text).unwrap_or(false);
    out.push(CheckLine::new("snapshot-round-trip", round, format!("bytes={}", text.len())));

    let k4 = cyl("complete:4");
    let mut details = Vec::new();
    let mut ok = true;
    for m in 1..=3 {
        let r = dla::stick_above_frequency(&k4, 2, m, 2000, rng::derive_seed(seed, m as u64), &opts).unwrap();
        ok &= r.holds();
        details.push(format!("m={m}:{:.4}>={:.4}", r.estimate.mean, r.bound_value));
    }
    out.push(CheckLine::new("stick-above-at-least-m-over-n", ok, details.join(" ")));

    let fresh = Cluster::new(cyl("cycle:6"));
    let r = experiment::estimate_new_layer_probability(&fresh, 500, rng::derive_seed(seed, 20), &opts).unwrap();
    out.push(CheckLine::new("fresh-probe-opens-layer", r.frequency.mean == 1.0, format!("freq={:.4}", r.frequency.mean)));

    let e = dla::entry_layer_visit_set(&RegularGraph::cycle(10).unwrap(), 20_000, rng::derive_seed(seed, 21));
    let s = &e.immediate_leave;
    out.push(CheckLine::new(
        "entry-walk-leaves-at-once",
        (s.mean - e.immediate_leave_exact).abs() <= 4.0 * s.std_error,
        format!("freq={:.4} exact={:.4}", s.mean, e.immediate_leave_exact),
    ));

    let k3 = RegularGraph::complete(3).unwrap();
    let a = dla::ProcessSide { cylinder: Arc::new(Cylinder::new(k3.clone())), opts, seed: rng::derive_seed(seed, 30) };
    let b = dla::ProcessSide { cylinder: Arc::new(Cylinder::new(k3.with_self_loops())), opts, seed: rng::derive_seed(seed, 31) };
    let r = dla::loop_equivalence_check(&a, &b, 6, 2000).unwrap();
    out.push(CheckLine::new(
        "loops-do-not-change-growth",
        r.p_value > 0.01,
        format!("p={:.4} bins={} particles=6 trials=2000", r.p_value, r.bins),
    ));
    out
}
