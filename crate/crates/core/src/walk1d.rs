//! Exact and simulated facts about one-dimensional walks: the ballot
//! probability, the distribution of the number of zeros, path enumeration,
//! and tail bounds for the lazy walk.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::rng;
use crate::stats::EstimateSummary;

/// Largest `2n` for the exact closed forms.
pub const MAX_EXACT_STEPS: u32 = 64;
/// Largest number of steps for simple-walk enumeration (`2^20` paths).
pub const MAX_SIMPLE_ENUM_STEPS: u32 = 20;
/// Largest number of steps for lazy-walk enumeration (`3^16` paths).
pub const MAX_LAZY_ENUM_STEPS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Walk1dError {
    #[error("n = {0} outside the supported range 1..=32")]
    NOutOfRange(u32),
    #[error("m = {m} must satisfy 1 <= m <= n = {n}")]
    MOutOfRange { n: u32, m: u32 },
    #[error("{steps} steps exceeds the enumeration cap {cap}")]
    TooManySteps { steps: u32, cap: u32 },
    #[error("move probability {0} outside (0, 1]")]
    BadAlpha(f64),
    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("beta {0} must be positive")]
    BadBeta(f64),
}

/// Lazy walk on the integers: holds with probability `1 - alpha`, else
/// moves `+1` or `-1` with equal probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LazyWalkParams {
    alpha: f64,
}

impl LazyWalkParams {
    pub fn new(alpha: f64) -> Result<Self, Walk1dError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Walk1dError::BadAlpha(alpha));
        }
        Ok(LazyWalkParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        if u < self.alpha / 2.0 {
            -1
        } else if u < self.alpha {
            1
        } else {
            0
        }
    }
}

fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(num.into(), den.into())
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn check_n(n: u32) -> Result<(), Walk1dError> {
    if n == 0 || 2 * n > MAX_EXACT_STEPS {
        return Err(Walk1dError::NOutOfRange(n));
    }
    Ok(())
}

/// `2^{-2n} C(2n, n)`, the probability that a simple walk from 0 stays
/// non-negative for steps `1..=2n`.
pub fn ballot_probability(n: u32) -> Result<BigRational, Walk1dError> {
    check_n(n)?;
    Ok(ratio(binomial(2 * n, n), BigUint::one() << (2 * n)))
}

/// `Pr[L(2n) < m] = 2^{-2n} sum_{j<m} 2^j C(2n - j, n)`, where `L(k)` counts
/// the times `1 <= i <= k` at which a simple walk from 0 is back at 0.
pub fn zero_count_cdf(n: u32, m: u32) -> Result<BigRational, Walk1dError> {
    check_n(n)?;
    if m == 0 || m > n {
        return Err(Walk1dError::MOutOfRange { n, m });
    }
    let num: BigUint = (0..m).map(|j| (BigUint::one() << j) * binomial(2 * n - j, n)).sum();
    Ok(ratio(num, BigUint::one() << (2 * n)))
}

/// The tail estimate `m / sqrt(2n - 2m)` for `Pr[L(2n) < m]`, `m < n`.
pub fn zero_count_stirling_bound(n: u32, m: u32) -> Result<f64, Walk1dError> {
    if m == 0 || m >= n {
        return Err(Walk1dError::MOutOfRange { n, m });
    }
    Ok(m as f64 / ((2 * n - 2 * m) as f64).sqrt())
}

/// Number of `i` in `1..path.len()` with `path[i] == 0`.
pub fn zeros(path: &[i64]) -> usize {
    path.iter().skip(1).filter(|&&x| x == 0).count()
}

pub fn all_nonnegative(path: &[i64]) -> bool {
    path.iter().all(|&x| x >= 0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathProbability {
    Exact(BigRational),
    Approx(f64),
}

impl PathProbability {
    pub fn to_f64(&self) -> f64 {
        match self {
            PathProbability::Exact(r) => to_f64(r),
            PathProbability::Approx(x) => *x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alphabet {
    /// `+1` / `-1`, each with probability 1/2.
    Simple,
    /// `-1`, `0`, `+1` with weights `alpha/2`, `1 - alpha`, `alpha/2`.
    Lazy(LazyWalkParams),
}

/// Probability of `event` over all walks of `steps` steps from 0. The
/// predicate sees the full path `S(0), ..., S(steps)`.
pub fn enumerate_paths(
    alphabet: Alphabet,
    steps: u32,
    event: impl Fn(&[i64]) -> bool,
) -> Result<PathProbability, Walk1dError> {
    match alphabet {
        Alphabet::Simple => enumerate_simple(steps, event).map(PathProbability::Exact),
        Alphabet::Lazy(p) => enumerate_lazy(p, steps, event).map(PathProbability::Approx),
    }
}

pub fn enumerate_simple(steps: u32, event: impl Fn(&[i64]) -> bool) -> Result<BigRational, Walk1dError> {
    if steps > MAX_SIMPLE_ENUM_STEPS {
        return Err(Walk1dError::TooManySteps { steps, cap: MAX_SIMPLE_ENUM_STEPS });
    }
    let mut path = vec![0i64; steps as usize + 1];
    let mut hits: u64 = 0;
    for mask in 0u64..(1 << steps) {
        for i in 0..steps as usize {
            path[i + 1] = path[i] + if mask >> i & 1 == 1 { 1 } else { -1 };
        }
        hits += u64::from(event(&path));
    }
    Ok(ratio(BigUint::from(hits), BigUint::one() << steps))
}

pub fn enumerate_lazy(params: LazyWalkParams, steps: u32, event: impl Fn(&[i64]) -> bool) -> Result<f64, Walk1dError> {
    if steps > MAX_LAZY_ENUM_STEPS {
        return Err(Walk1dError::TooManySteps { steps, cap: MAX_LAZY_ENUM_STEPS });
    }
    let a = params.alpha();
    let moves = [(-1i64, a / 2.0), (0, 1.0 - a), (1, a / 2.0)];
    let mut path = vec![0i64; steps as usize + 1];

    fn go(path: &mut [i64], i: usize, prob: f64, moves: &[(i64, f64); 3], event: &dyn Fn(&[i64]) -> bool) -> f64 {
        if i + 1 == path.len() {
            return if event(path) { prob } else { 0.0 };
        }
        let mut total = 0.0;
        for &(dx, p) in moves {
            if p == 0.0 {
                continue;
            }
            path[i + 1] = path[i] + dx;
            total += go(path, i + 1, prob * p, moves, event);
        }
        total
    }
    Ok(go(&mut path, 0, 1.0, &moves, &event))
}

/// Left side of the zeros inequality at `n = 1` (the worst case):
/// `2 exp(-alpha^2 C / 2) + sqrt(2 / (alpha C - 4))`.
pub fn zeros_inequality_lhs(alpha: f64, c: f64) -> f64 {
    if alpha * c <= 4.0 {
        return f64::INFINITY;
    }
    2.0 * (-alpha * alpha * c / 2.0).exp() + (2.0 / (alpha * c - 4.0)).sqrt()
}

/// Smallest `C > 4 / alpha` (to bisection precision) with
/// `Pr[L(ceil(C n^2)) < n] <= eps` guaranteed for every `n >= 1` by the
/// concentration-plus-ballot argument for the lazy walk.
///
/// The per-`n` bound `2 exp(-alpha^2 C n^2 / 2) + sqrt(2) n / sqrt(alpha C n^2 - 4n)`
/// decreases in `n`, so `n = 1` decides.
pub fn zeros_constant(alpha: f64, eps: f64) -> Result<f64, Walk1dError> {
    LazyWalkParams::new(alpha)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Walk1dError::BadEpsilon(eps));
    }
    let lo0 = 4.0 / alpha;
    let mut hi = 2.0 * lo0;
    while zeros_inequality_lhs(alpha, hi) > eps {
        hi *= 2.0;
    }
    let mut lo = lo0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zeros_inequality_lhs(alpha, mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Kolmogorov bound on the running maximum of the lazy walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxTail {
    /// `sqrt(beta alpha m)`.
    pub threshold: f64,
    /// `1 / beta`.
    pub bound: f64,
    /// `Var[S(m)] = alpha m`.
    pub variance: f64,
}

pub fn lazy_max_tail(params: LazyWalkParams, m: u64, beta: f64) -> Result<MaxTail, Walk1dError> {
    if !(beta > 0.0) {
        return Err(Walk1dError::BadBeta(beta));
    }
    let variance = params.alpha() * m as f64;
    Ok(MaxTail { threshold: (beta * variance).sqrt(), bound: 1.0 / beta, variance })
}

/// `S(0), ..., S(steps)` from the stream `seed`.
pub fn simulate_lazy_walk(params: LazyWalkParams, steps: usize, seed: u64) -> Vec<i64> {
    let mut rng = rng::from_seed(seed);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(0);
    let mut s = 0;
    for _ in 0..steps {
        s += params.step(&mut rng);
        path.push(s);
    }
    path
}

/// Empirical `Pr[L(ceil(C n^2)) < n]`.
pub fn zero_count_frequency<R: Rng + ?Sized>(
    params: LazyWalkParams,
    c: f64,
    n: u64,
    trials: u64,
    rng: &mut R,
) -> EstimateSummary {
    let steps = (c * (n * n) as f64).ceil() as u64;
    let mut hits = 0;
    for _ in 0..trials {
        let (mut s, mut z) = (0i64, 0u64);
        for _ in 0..steps {
            s += params.step(rng);
            if s == 0 {
                z += 1;
                if z >= n {
                    break;
                }
            }
        }
        hits += u64::from(z < n);
    }
    EstimateSummary::from_counts(hits, trials, 0)
}

/// Empirical `Pr[max_{i <= m} |S(i)| >= threshold]`.
pub fn max_tail_frequency<R: Rng + ?Sized>(
    params: LazyWalkParams,
    m: u64,
    threshold: f64,
    trials: u64,
    rng: &mut R,
) -> EstimateSummary {
    let mut hits = 0;
    for _ in 0..trials {
        let mut s = 0i64;
        let mut hit = false;
        for _ in 0..m {
            s += params.step(rng);
            if s.unsigned_abs() as f64 >= threshold {
                hit = true;
                break;
            }
        }
        hits += u64::from(hit);
    }
    EstimateSummary::from_counts(hits, trials, 0)
}

/// Sample variance of `S(m)` over `trials` independent walks.
pub fn endpoint_variance<R: Rng + ?Sized>(params: LazyWalkParams, m: u64, trials: u64, rng: &mut R) -> f64 {
    let ends: Vec<f64> = (0..trials)
        .map(|_| (0..m).map(|_| params.step(rng)).sum::<i64>() as f64)
        .collect();
    let mean = ends.iter().sum::<f64>() / ends.len() as f64;
    ends.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (ends.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn ballot_small_values() {
        assert_eq!(ballot_probability(1).unwrap(), q(1, 2));
        assert_eq!(ballot_probability(2).unwrap(), q(3, 8));
        assert!(ballot_probability(0).is_err());
        assert!(ballot_probability(33).is_err());
        assert!(ballot_probability(32).is_ok());
    }

    #[test]
    fn zero_cdf_small_values() {
        assert_eq!(zero_count_cdf(1, 1).unwrap(), q(1, 2));
        assert_eq!(zero_count_cdf(2, 1).unwrap(), q(3, 8));
        assert!(zero_count_cdf(2, 3).is_err());
        assert!(zero_count_cdf(2, 0).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let p = enumerate_simple(2, |s| s[2] == 0).unwrap();
        assert_eq!(p, q(1, 2));
        let lazy = LazyWalkParams::new(0.5).unwrap();
        let p = enumerate_lazy(lazy, 1, |s| s[1] == 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let p = enumerate_simple(4, |s| zeros(s) < 1).unwrap();
        assert_eq!(p, zero_count_cdf(2, 1).unwrap());
        assert!(enumerate_simple(21, |_| true).is_err());
        assert!(enumerate_lazy(lazy, 17, |_| true).is_err());
    }

    #[test]
    fn lazy_enumeration_sums_to_one() {
        let lazy = LazyWalkParams::new(0.3).unwrap();
        let p = enumerate_lazy(lazy, 10, |_| true).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_tail_example() {
        let t = lazy_max_tail(LazyWalkParams::new(1.0).unwrap(), 4, 4.0).unwrap();
        assert_eq!(t.threshold, 4.0);
        assert_eq!(t.bound, 0.25);
        let exact = enumerate_simple(4, |s| s.iter().any(|x| x.abs() >= 4)).unwrap();
        assert_eq!(exact, q(1, 8));
        let t = lazy_max_tail(LazyWalkParams::new(0.5).unwrap(), 10, 1.0).unwrap();
        assert_eq!(t.bound, 1.0);
        assert!(lazy_max_tail(LazyWalkParams::new(0.5).unwrap(), 10, 0.0).is_err());
    }

    #[test]
    fn zeros_constant_properties() {
        for alpha in [0.1, 0.5, 1.0] {
            let mut prev = 0.0;
            for eps in [0.9, 0.5, 0.2, 0.05] {
                let c = zeros_constant(alpha, eps).unwrap();
                assert!(c > 4.0 / alpha);
                assert!(zeros_inequality_lhs(alpha, c) <= eps);
                assert!(c >= prev);
                prev = c;
            }
        }
        assert!(zeros_constant(0.5, 1.0).is_err());
        assert!(zeros_constant(0.0, 0.5).is_err());
    }

    #[test]
    fn simulation_contract() {
        let p = LazyWalkParams::new(1.0).unwrap();
        assert_eq!(simulate_lazy_walk(p, 0, 3), vec![0]);
        let path = simulate_lazy_walk(p, 500, 3);
        assert!(path.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        assert_eq!(path, simulate_lazy_walk(p, 500, 3));
        assert!(LazyWalkParams::new(1.5).is_err());
    }
}
