//! Estimators, bound verdicts and the two-sample chi-square test.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Normal-approximation 95% multiplier.
pub const Z95: f64 = 1.96;

/// Width of the "inconclusive" band around a bound, in standard errors.
pub const INCONCLUSIVE_SIGMAS: f64 = 3.0;

/// Mean of i.i.d. samples with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: f64,
    pub trials: u64,
    pub cap_hits: u64,
}

impl EstimateSummary {
    /// Summarizes `samples`. The values are sorted before summation so the
    /// result does not depend on the order the samples arrived in.
    pub fn from_samples(samples: &[f64], cap_hits: u64) -> Self {
        let trials = samples.len() as u64;
        if samples.is_empty() {
            return Self { mean: f64::NAN, std_error: f64::NAN, ci95: f64::NAN, trials, cap_hits };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let std_error = if sorted.len() < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = sorted.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            let var = dev.iter().sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, std_error, ci95: Z95 * std_error, trials, cap_hits }
    }

    /// Bernoulli frequency `successes / trials`.
    pub fn from_counts(successes: u64, trials: u64, cap_hits: u64) -> Self {
        if trials == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, ci95: f64::NAN, trials, cap_hits };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        // Sample variance of 0/1 data, matching from_samples.
        let std_error = if trials < 2 { 0.0 } else { (p * (1.0 - p) / (n - 1.0)).sqrt() };
        Self { mean: p, std_error, ci95: Z95 * std_error, trials, cap_hits }
    }

    pub fn lower(&self, sigmas: f64) -> f64 {
        self.mean - sigmas * self.std_error
    }

    pub fn upper(&self, sigmas: f64) -> f64 {
        self.mean + sigmas * self.std_error
    }
}

impl fmt::Display for EstimateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.6} (n={}", self.mean, self.ci95, self.trials)?;
        if self.cap_hits > 0 {
            write!(f, ", cap_hits={}", self.cap_hits)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// The estimate should not exceed the bound.
    AtMost,
    /// The estimate should be at least the bound.
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    /// Violated by the point estimate, but within the statistical band.
    Inconclusive,
    Fail,
    /// The bound involves an unknown constant or unmet hypothesis; the
    /// comparison is reported without a verdict.
    Descriptive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive-within-ci",
            Verdict::Fail => "fail",
            Verdict::Descriptive => "descriptive",
        };
        f.write_str(s)
    }
}

/// A theoretical bound compared with a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub bound_value: f64,
    pub direction: Direction,
    pub estimate: EstimateSummary,
    pub verdict: Verdict,
    pub applicability: Option<String>,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, bound_value: f64, direction: Direction, estimate: EstimateSummary) -> Self {
        let verdict = judge(bound_value, direction, &estimate);
        Self { name: name.into(), bound_value, direction, estimate, verdict, applicability: None }
    }

    /// A comparison that carries no verdict, only the caveat.
    pub fn descriptive(
        name: impl Into<String>,
        bound_value: f64,
        direction: Direction,
        estimate: EstimateSummary,
        note: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            bound_value,
            direction,
            estimate,
            verdict: Verdict::Descriptive,
            applicability: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.applicability = Some(note.into());
        self
    }

    /// True unless the verdict is an outright failure.
    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        };
        write!(f, "{}: {} {} {:.6} -> {}", self.name, self.estimate, op, self.bound_value, self.verdict)?;
        if let Some(note) = &self.applicability {
            write!(f, " [{note}]")?;
        }
        Ok(())
    }
}

fn judge(bound: f64, direction: Direction, est: &EstimateSummary) -> Verdict {
    if !est.mean.is_finite() || !bound.is_finite() {
        return Verdict::Descriptive;
    }
    let slack = INCONCLUSIVE_SIGMAS * est.std_error;
    match direction {
        Direction::AtMost if est.mean <= bound => Verdict::Pass,
        Direction::AtMost if est.mean - slack <= bound => Verdict::Inconclusive,
        Direction::AtLeast if est.mean >= bound => Verdict::Pass,
        Direction::AtLeast if est.mean + slack >= bound => Verdict::Inconclusive,
        _ => Verdict::Fail,
    }
}

/// Result of a two-sample chi-square homogeneity test.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of bins after merging sparse categories.
    pub bins: usize,
    /// Categories folded into the overflow bin.
    pub merged_categories: usize,
}

/// Minimum expected count per cell before a category is merged.
pub const MIN_EXPECTED: f64 = 5.0;

/// Two-sample chi-square test on categorical outcomes. Categories whose
/// expected count in either sample falls below [`MIN_EXPECTED`] are pooled
/// into one overflow bin (itself dropped if still too sparse).
pub fn chi_square_two_sample<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> ChiSquareReport {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let total = (na + nb) as f64;
    if na == 0 || nb == 0 {
        return ChiSquareReport { statistic: 0.0, dof: 0, p_value: 1.0, bins: 0, merged_categories: 0 };
    }
    let mut keys: Vec<K> = a.keys().chain(b.keys()).cloned().collect();
    keys.sort();
    keys.dedup();

    let fa = na as f64 / total;
    let fb = nb as f64 / total;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut overflow = (0.0, 0.0);
    let mut merged = 0;
    for k in &keys {
        let ca = *a.get(k).unwrap_or(&0) as f64;
        let cb = *b.get(k).unwrap_or(&0) as f64;
        let row = ca + cb;
        if row * fa.min(fb) < MIN_EXPECTED {
            overflow.0 += ca;
            overflow.1 += cb;
            merged += 1;
        } else {
            cells.push((ca, cb));
        }
    }
    if merged > 0 && (overflow.0 + overflow.1) * fa.min(fb) >= MIN_EXPECTED {
        cells.push(overflow);
    }
    if cells.len() < 2 {
        return ChiSquareReport { statistic: 0.0, dof: 0, p_value: 1.0, bins: cells.len(), merged_categories: merged };
    }
    let (sa, sb) = cells.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    let st = sa + sb;
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let row = ca + cb;
        let ea = row * sa / st;
        let eb = row * sb / st;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let dof = cells.len() - 1;
    let p_value = chi_square_sf(stat, dof);
    ChiSquareReport { statistic: stat, dof, p_value, bins: cells.len(), merged_categories: merged }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Some(LinearFit { slope, intercept, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_constant_samples() {
        let s = EstimateSummary::from_samples(&[1.0; 10], 0);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.ci95, 0.0);
    }

    #[test]
    fn summary_is_order_independent() {
        let xs = [0.1, 7.3, 1e-9, 3.3, 2.2, 100.0, 0.7];
        let mut ys = xs;
        ys.reverse();
        assert_eq!(EstimateSummary::from_samples(&xs, 0), EstimateSummary::from_samples(&ys, 0));
    }

    #[test]
    fn counts_match_samples() {
        let samples: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let a = EstimateSummary::from_samples(&samples, 0);
        let b = EstimateSummary::from_counts(10, 40, 0);
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.std_error - b.std_error).abs() < 1e-12);
    }

    #[test]
    fn ci_is_196_se() {
        let s = EstimateSummary::from_samples(&[1.0, 2.0, 4.0, 8.0], 0);
        assert!((s.ci95 - 1.96 * s.std_error).abs() < 1e-15);
    }

    #[test]
    fn verdicts() {
        let est = EstimateSummary { mean: 0.5, std_error: 0.01, ci95: 0.0196, trials: 100, cap_hits: 0 };
        assert_eq!(BoundCheck::new("a", 0.6, Direction::AtMost, est).verdict, Verdict::Pass);
        assert_eq!(BoundCheck::new("b", 0.48, Direction::AtMost, est).verdict, Verdict::Inconclusive);
        assert_eq!(BoundCheck::new("c", 0.4, Direction::AtMost, est).verdict, Verdict::Fail);
        assert_eq!(BoundCheck::new("d", 0.4, Direction::AtLeast, est).verdict, Verdict::Pass);
        assert_eq!(BoundCheck::new("e", 0.52, Direction::AtLeast, est).verdict, Verdict::Inconclusive);
        assert_eq!(BoundCheck::new("f", 0.6, Direction::AtLeast, est).verdict, Verdict::Fail);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let mut a = BTreeMap::new();
        a.insert(1, 50u64);
        a.insert(2, 70);
        a.insert(3, 30);
        let r = chi_square_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn different_samples_give_small_p() {
        let a: BTreeMap<u8, u64> = [(0, 900), (1, 100)].into_iter().collect();
        let b: BTreeMap<u8, u64> = [(0, 500), (1, 500)].into_iter().collect();
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-10);
    }

    #[test]
    fn sparse_categories_are_merged() {
        let a: BTreeMap<u8, u64> = [(0, 100), (1, 100), (2, 1), (3, 2), (4, 3)].into_iter().collect();
        let r = chi_square_two_sample(&a, &a);
        assert_eq!(r.merged_categories, 3);
        assert_eq!(r.bins, 3);
    }

    #[test]
    fn chi_square_tail_known_value() {
        // P[chi2_1 > 3.841459] = 0.05
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn exact_line_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x - 2.0).collect();
        let fit = least_squares(&xs, &ys).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!(fit.residual_norm() < 1e-12);
    }
}
