//! Transition-matrix spectra, the lazy-walk mixing time, and the
//! set-avoidance bounds driven by the second eigenvalue.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::graph::RegularGraph;
use crate::rng;
use crate::stats::{BoundCheck, Direction, EstimateSummary};

/// Largest graph handled by the dense symmetric eigensolver.
pub const DENSE_LIMIT: usize = 4096;
/// Convergence tolerance of the power-iteration fallback.
pub const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 200_000;

/// `log log n` below this is treated as undefined by [`check_fast_mixing`].
pub const MIN_LOGLOG: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("mixing time exceeded the cap of {0} steps")]
    MixingCapExceeded(u64),
    #[error("log log n = {loglog:.4} is too small for n = {n}")]
    LogLogUndefined { n: usize, loglog: f64 },
    #[error("row minimum of the lazy transition power decreased at step {step} (start {start})")]
    MonotonicityViolated { start: usize, step: u64 },
    #[error("constrained path count {count} exceeds the bound {bound}")]
    PathBoundViolated { count: String, bound: f64 },
    #[error("set fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("need at least one constraint set")]
    NoSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    /// Deflated power iteration; `eigenvalues` holds only
    /// `[1, lambda_2, lambda_min]`.
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingTime {
    Steps(u64),
    ExceededCap(u64),
}

impl MixingTime {
    pub fn steps(self) -> Option<u64> {
        match self {
            MixingTime::Steps(t) => Some(t),
            MixingTime::ExceededCap(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub n: usize,
    pub d: usize,
    /// Spectrum of `P = A / d`, descending.
    pub eigenvalues: Vec<f64>,
    /// `max_{i>1} |lambda_i|`; equals 1 for bipartite graphs.
    pub lambda: f64,
    pub gap: f64,
    pub mixing_time: Option<MixingTime>,
    pub method: EigenMethod,
}

impl SpectralProfile {
    pub fn with_mixing_time(mut self, m: MixingTime) -> Self {
        self.mixing_time = Some(m);
        self
    }

    /// Second largest eigenvalue (signed).
    pub fn lambda_2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(1.0)
    }

    /// Largest modulus over eigenvalues other than 1 and, for bipartite
    /// graphs, other than -1. Controls how fast the walk equilibrates
    /// within a parity class.
    pub fn lambda_within_parity(&self, bipartite: bool) -> f64 {
        if !bipartite {
            return self.lambda;
        }
        match self.method {
            EigenMethod::Dense => {
                let k = self.eigenvalues.len();
                if k <= 2 {
                    return 0.0;
                }
                self.eigenvalues[1].abs().max(self.eigenvalues[k - 2].abs())
            }
            // the spectrum of a bipartite graph is symmetric about 0
            EigenMethod::PowerIteration => self.lambda_2().abs(),
        }
    }
}

/// Spectrum of the transition matrix. Dense up to [`DENSE_LIMIT`]
/// vertices, power iteration above.
pub fn eigen_profile(g: &RegularGraph) -> SpectralProfile {
    eigen_profile_with_limit(g, DENSE_LIMIT)
}

pub fn eigen_profile_with_limit(g: &RegularGraph, dense_limit: usize) -> SpectralProfile {
    if g.n() <= dense_limit {
        dense_profile(g)
    } else {
        power_profile(g)
    }
}

/// `P = A / d` as a dense matrix; loop slots land on the diagonal.
pub fn transition_matrix(g: &RegularGraph) -> DMatrix<f64> {
    let n = g.n();
    let w = 1.0 / g.degree() as f64;
    let mut p = DMatrix::zeros(n, n);
    for v in 0..n {
        for &u in g.neighbors(v) {
            p[(v, u as usize)] += w;
        }
    }
    p
}

fn dense_profile(g: &RegularGraph) -> SpectralProfile {
    let eig = SymmetricEigen::new(transition_matrix(g));
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let lambda = eigenvalues[1..].iter().fold(0.0f64, |m, x| m.max(x.abs())).min(1.0);
    SpectralProfile {
        n: g.n(),
        d: g.degree(),
        eigenvalues,
        lambda,
        gap: 1.0 - lambda,
        mixing_time: None,
        method: EigenMethod::Dense,
    }
}

/// `y = P x`.
fn apply_p(g: &RegularGraph, x: &[f64], y: &mut [f64]) {
    let inv_d = 1.0 / g.degree() as f64;
    for (v, out) in y.iter_mut().enumerate() {
        *out = g.neighbors(v).iter().map(|&u| x[u as usize]).sum::<f64>() * inv_d;
    }
}

fn project_out_constant(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Top eigenvalue of `(I + sign * P) / 2` on the complement of the
/// constant vector, returned as the matching eigenvalue of `P`.
fn deflated_power(g: &RegularGraph, sign: f64) -> f64 {
    let n = g.n();
    let mut rng = rng::from_seed(0x5eed_u64 ^ n as u64);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project_out_constant(&mut x);
    normalize(&mut x);
    let mut px = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut rayleigh = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        apply_p(g, &x, &mut px);
        for (p, xv) in px.iter_mut().zip(&x) {
            *p = 0.5 * (xv + sign * *p);
        }
        rayleigh = px.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        project_out_constant(&mut px);
        if normalize(&mut px) == 0.0 {
            break;
        }
        std::mem::swap(&mut x, &mut px);
        if (rayleigh - prev).abs() < POWER_TOL * 1e-3 {
            break;
        }
        prev = rayleigh;
    }
    sign * (2.0 * rayleigh - 1.0)
}

fn power_profile(g: &RegularGraph) -> SpectralProfile {
    let lambda_2 = deflated_power(g, 1.0).clamp(-1.0, 1.0);
    let lambda_min = deflated_power(g, -1.0).clamp(-1.0, 1.0);
    let lambda = lambda_2.abs().max(lambda_min.abs());
    SpectralProfile {
        n: g.n(),
        d: g.degree(),
        eigenvalues: vec![1.0, lambda_2, lambda_min],
        lambda,
        gap: 1.0 - lambda,
        mixing_time: None,
        method: EigenMethod::PowerIteration,
    }
}

/// Least `t` such that every entry of `((A + I) / (d + 1))^t` is at least
/// `1 / (2n)`.
///
/// The lazy matrix is doubly stochastic, so the minimum of each row of its
/// powers never decreases; the first `t` that works therefore works for all
/// later times as well. The monotonicity is re-checked while iterating.
pub fn mixing_time(g: &RegularGraph, cap: u64) -> Result<MixingTime, SpectralError> {
    let starts: Vec<usize> = (0..g.n()).collect();
    #[cfg(feature = "parallel")]
    let per_row: Vec<Result<MixingTime, SpectralError>> = {
        use rayon::prelude::*;
        starts.par_iter().map(|&v| row_mixing_time(g, v, cap)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_row: Vec<Result<MixingTime, SpectralError>> = starts.iter().map(|&v| row_mixing_time(g, v, cap)).collect();

    let mut worst = 0;
    for r in per_row {
        match r? {
            MixingTime::Steps(t) => worst = worst.max(t),
            exceeded => return Ok(exceeded),
        }
    }
    Ok(MixingTime::Steps(worst))
}

fn row_mixing_time(g: &RegularGraph, start: usize, cap: u64) -> Result<MixingTime, SpectralError> {
    let n = g.n();
    let target = 1.0 / (2.0 * n as f64) * (1.0 - 1e-12);
    let w = 1.0 / (g.degree() + 1) as f64;
    let mut x = vec![0.0; n];
    x[start] = 1.0;
    let mut y = vec![0.0; n];
    let mut prev_min = 0.0f64;
    for t in 1..=cap {
        for (u, out) in y.iter_mut().enumerate() {
            *out = (x[u] + g.neighbors(u).iter().map(|&v| x[v as usize]).sum::<f64>()) * w;
        }
        std::mem::swap(&mut x, &mut y);
        let row_min = x.iter().copied().fold(f64::INFINITY, f64::min);
        if row_min < prev_min - 1e-12 {
            return Err(SpectralError::MonotonicityViolated { start, step: t });
        }
        prev_min = row_min;
        if row_min >= target {
            return Ok(MixingTime::Steps(t));
        }
    }
    Ok(MixingTime::ExceededCap(cap))
}

/// `log^2 n / (log log n)^5`, natural logarithms.
pub fn fast_mixing_threshold(n: usize) -> Result<f64, SpectralError> {
    let ln = (n as f64).ln();
    let loglog = ln.ln();
    if !(loglog >= MIN_LOGLOG) {
        return Err(SpectralError::LogLogUndefined { n, loglog });
    }
    Ok(ln * ln / loglog.powi(5))
}

/// Compares the mixing time against the growth theorem's hypothesis
/// threshold. Deterministic, so the estimate carries zero error.
pub fn check_fast_mixing(profile: &SpectralProfile) -> Result<BoundCheck, SpectralError> {
    let t = match profile.mixing_time {
        Some(MixingTime::Steps(t)) => t,
        Some(MixingTime::ExceededCap(c)) => return Err(SpectralError::MixingCapExceeded(c)),
        None => return Err(SpectralError::MixingCapExceeded(0)),
    };
    let threshold = fast_mixing_threshold(profile.n)?;
    let est = EstimateSummary::from_samples(&[t as f64], 0);
    Ok(BoundCheck::new("mixing_time <= log^2 n / (log log n)^5", threshold, Direction::AtMost, est)
        .with_note("the growth theorem also needs n > n0(d), which is not quantified"))
}

/// Upper bound `exp(-(c/2)(1 - lambda))`, `c = sum_s (1 - c_s)`, on the
/// probability that a walk from a uniform start stays inside sets of
/// relative sizes `c_s`.
pub fn avoidance_bound(lambda: f64, fractions: &[f64]) -> Result<f64, SpectralError> {
    let mut c = 0.0;
    for &f in fractions {
        if !(0.0..=1.0).contains(&f) {
            return Err(SpectralError::BadFraction(f));
        }
        c += 1.0 - f;
    }
    Ok((-(c / 2.0) * (1.0 - lambda)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCount {
    pub count: BigUint,
    pub bound: f64,
}

fn masks(n: usize, sets: &[Vec<usize>]) -> Result<Vec<Vec<bool>>, SpectralError> {
    sets.iter()
        .map(|set| {
            let mut mask = vec![false; n];
            for &v in set {
                if v >= n {
                    return Err(SpectralError::VertexOutOfRange { vertex: v, n });
                }
                mask[v] = true;
            }
            Ok(mask)
        })
        .collect()
}

/// Exact number of walks `x_0, ..., x_t` with `x_s` in `sets[s-1]` for
/// `s >= 1` (`x_0` free), together with the spectral bound
/// `n * prod_s sqrt(c_s d^2 + (1 - c_s) d^2 lambda^2)`.
///
/// Returns an error if the count exceeds the bound by more than a relative
/// `1e-9`.
pub fn count_constrained_paths(g: &RegularGraph, lambda: f64, sets: &[Vec<usize>]) -> Result<PathCount, SpectralError> {
    if sets.is_empty() {
        return Err(SpectralError::NoSets);
    }
    let n = g.n();
    let masks = masks(n, sets)?;
    let mut cur: Vec<BigUint> = vec![BigUint::from(1u32); n];
    let mut next: Vec<BigUint> = vec![BigUint::zero(); n];
    for mask in &masks {
        for (u, out) in next.iter_mut().enumerate() {
            *out = if mask[u] {
                g.neighbors(u).iter().map(|&w| &cur[w as usize]).sum()
            } else {
                BigUint::zero()
            };
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let count: BigUint = cur.iter().sum();

    let d2 = (g.degree() * g.degree()) as f64;
    let bound = n as f64
        * masks
            .iter()
            .map(|m| {
                let c = m.iter().filter(|&&b| b).count() as f64 / n as f64;
                (c * d2 + (1.0 - c) * d2 * lambda * lambda).sqrt()
            })
            .product::<f64>();
    let as_f64 = count.to_f64().unwrap_or(f64::INFINITY);
    if as_f64 > bound * (1.0 + 1e-9) {
        return Err(SpectralError::PathBoundViolated { count: count.to_string(), bound });
    }
    Ok(PathCount { count, bound })
}

/// Fraction of simple walks from a uniform start with `x_s` in
/// `sets[s-1]` for every `s >= 1`.
pub fn avoidance_frequency<R: Rng + ?Sized>(
    g: &RegularGraph,
    sets: &[Vec<usize>],
    trials: u64,
    rng: &mut R,
) -> Result<EstimateSummary, SpectralError> {
    let masks = masks(g.n(), sets)?;
    let mut hits = 0;
    for _ in 0..trials {
        let mut x = rng::index(rng, g.n());
        let mut inside = true;
        for mask in &masks {
            x = g.neighbor(x, rng::index(rng, g.degree()));
            if !mask[x] {
                inside = false;
                break;
            }
        }
        hits += u64::from(inside);
    }
    Ok(EstimateSummary::from_counts(hits, trials, 0))
}
