//! Monte Carlo estimates of growth times, densities and per-particle
//! probabilities, compared against the known bounds, plus CSV output.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dla::{Cluster, DlaError, DropOptions, GrowUntil, ParticleOutcome};
use crate::graph::{GraphError, GraphSpec, RegularGraph};
use crate::rng;
use crate::spectral::{self, SpectralError};
use crate::stats::{least_squares, BoundCheck, Direction, EstimateSummary};
use crate::walk::{Cylinder, ExcursionSample, Sign, DEFAULT_STEP_CAP};

/// Salt for the probe cluster of a sweep.
const PROBE_SALT: u64 = 0x7072_6f62_6573;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replica {replica}: {source}")]
    Replica { replica: u64, source: DlaError },
    #[error(transparent)]
    Dla(#[from] DlaError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("need at least 3 finite estimates for a fit, got {0}")]
    DegenerateFit(usize),
    #[error("diagnostics need n >= 16, got n = {0}")]
    GraphTooSmall(usize),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    /// True when a particle hit the step cap.
    pub fn is_cap_exceeded(&self) -> bool {
        matches!(
            self,
            ExperimentError::Dla(DlaError::CapExceeded { .. })
                | ExperimentError::Replica { source: DlaError::CapExceeded { .. }, .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: String,
    pub target_layers: Vec<u64>,
    pub replicas: u64,
    pub seed: u64,
    pub step_cap: u64,
    /// Extra layers `phi(m)` grown past `m` before reading `D(m)`; unset
    /// means `ceil(sqrt(m)) + 10`.
    pub density_overshoot: Option<u64>,
    pub alphas: Vec<f64>,
    /// Probe particles dropped on a grown cluster for the probe table.
    pub probes: u64,
    pub accelerate: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: "cycle:16".into(),
            target_layers: vec![10],
            replicas: 20,
            seed: 1,
            step_cap: DEFAULT_STEP_CAP,
            density_overshoot: None,
            alphas: vec![2.0],
            probes: 0,
            accelerate: true,
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks the configuration; returns warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<String>, ExperimentError> {
        self.graph.parse::<GraphSpec>()?;
        if self.replicas == 0 {
            return Err(ExperimentError::Config("replicas must be at least 1".into()));
        }
        if self.target_layers.is_empty() || self.target_layers.contains(&0) {
            return Err(ExperimentError::Config("target layers must be non-empty and at least 1".into()));
        }
        if self.density_overshoot == Some(0) {
            return Err(ExperimentError::Config("density overshoot must be at least 1".into()));
        }
        if self.step_cap == 0 {
            return Err(ExperimentError::Config("step cap must be at least 1".into()));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(ExperimentError::Config("alphas must be finite and non-negative".into()));
        }
        let mut warnings = Vec::new();
        for &m in &self.target_layers {
            let ratio = self.phi(m) as f64 / m as f64;
            if ratio > 0.5 {
                warnings.push(format!("overshoot phi({m}) = {} is {ratio:.2} m; late sticks below m are likely", self.phi(m)));
            }
        }
        Ok(warnings)
    }

    pub fn phi(&self, m: u64) -> u64 {
        self.density_overshoot.unwrap_or_else(|| default_overshoot(m))
    }

    pub fn drop_options(&self) -> DropOptions {
        DropOptions {
            cap: self.step_cap,
            alpha: self.alphas.first().copied().unwrap_or(2.0),
            accelerate: self.accelerate,
            ..DropOptions::default()
        }
    }

    pub fn cylinder(&self) -> Result<Arc<Cylinder>, ExperimentError> {
        Ok(Arc::new(Cylinder::new(self.graph.parse::<GraphSpec>()?.build()?)))
    }

    /// One `key=value` line per field in a fixed order; the input of
    /// [`ExperimentConfig::hash_hex`].
    pub fn canonical(&self) -> String {
        let list = |xs: &[u64]| xs.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let alphas = self.alphas.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let overshoot = self.density_overshoot.map_or("default".to_string(), |p| p.to_string());
        let output = self.output.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        format!(
            "graph={}\ntarget_layers={}\nreplicas={}\nseed={}\nstep_cap={}\ndensity_overshoot={}\nalphas={}\nprobes={}\naccelerate={}\noutput={}\n",
            self.graph,
            list(&self.target_layers),
            self.replicas,
            self.seed,
            self.step_cap,
            overshoot,
            alphas,
            self.probes,
            self.accelerate,
            output
        )
    }

    /// SHA-256 of the canonical form, hex encoded. The output path is left
    /// out so moving results does not change the hash.
    pub fn hash_hex(&self) -> String {
        let c = ExperimentConfig { output: None, ..self.clone() };
        Sha256::digest(c.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

}

/// `ceil(sqrt(m)) + 10`.
pub fn default_overshoot(m: u64) -> u64 {
    (m as f64).sqrt().ceil() as u64 + 10
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReading {
    pub m: u64,
    pub phi: u64,
    /// `D(m)` read when layer `m + phi` is first reached.
    pub d_m: f64,
    pub t_m: u64,
    pub t_m_prime: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub replica: u64,
    /// `T_k` for `k = 0..=` the highest layer grown to.
    pub first_touch: Vec<u64>,
    pub density: Vec<DensityReading>,
    pub particles: u64,
}

impl ReplicaRun {
    /// `T_m` strictly increasing along this replica.
    pub fn monotone(&self) -> bool {
        self.first_touch.windows(2).all(|w| w[0] < w[1])
    }
}

/// Grows one replica to the highest layer the configuration needs and
/// reads `T_m` and `D(m)` along the way.
pub fn run_replica(cylinder: &Arc<Cylinder>, cfg: &ExperimentConfig, replica: u64) -> Result<ReplicaRun, DlaError> {
    let mut rng = rng::split(cfg.seed, replica);
    let opts = cfg.drop_options();
    let mut cluster = Cluster::new(cylinder.clone());
    let stops: BTreeSet<u64> = cfg.target_layers.iter().flat_map(|&m| [m, m + cfg.phi(m)]).collect();
    let mut density = Vec::new();
    for &k in &stops {
        cluster.grow(GrowUntil::Layer(k), &mut rng, &opts)?;
        for &m in cfg.target_layers.iter().filter(|&&m| m + cfg.phi(m) == k) {
            density.push(DensityReading {
                m,
                phi: cfg.phi(m),
                d_m: cluster.density_upto(m),
                t_m: cluster.first_touch_times()[m as usize],
                t_m_prime: cluster.first_touch_times()[k as usize],
            });
        }
    }
    density.sort_by_key(|r| r.m);
    Ok(ReplicaRun { replica, first_touch: cluster.first_touch_times().to_vec(), density, particles: cluster.t() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub config: ExperimentConfig,
    pub n: usize,
    pub d: usize,
    pub transitive: bool,
    /// Sorted by replica index.
    pub runs: Vec<ReplicaRun>,
}

/// Runs every replica on its own stream of `cfg.seed`. Fails on the first
/// replica (by index) that hits the step cap.
pub fn run_replicas(cfg: &ExperimentConfig) -> Result<Sweep, ExperimentError> {
    cfg.validate()?;
    let cylinder = cfg.cylinder()?;
    let ids: Vec<u64> = (0..cfg.replicas).collect();
    #[cfg(feature = "parallel")]
    let results: Vec<Result<ReplicaRun, DlaError>> = {
        use rayon::prelude::*;
        ids.par_iter().map(|&r| run_replica(&cylinder, cfg, r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<ReplicaRun, DlaError>> = ids.iter().map(|&r| run_replica(&cylinder, cfg, r)).collect();

    let mut runs = Vec::with_capacity(results.len());
    for (replica, r) in ids.into_iter().zip(results) {
        runs.push(r.map_err(|source| ExperimentError::Replica { replica, source })?);
    }
    let g = cylinder.graph();
    Ok(Sweep { config: cfg.clone(), n: g.n(), d: g.degree(), transitive: g.transitive_hint(), runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TEstimate {
    pub m: u64,
    pub summary: EstimateSummary,
    pub checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TReport {
    pub per_m: Vec<TEstimate>,
    /// `T_m` strictly increasing in every replica.
    pub pathwise_monotone: bool,
}

/// `4 m n / log log n`; `None` where `log log n` is not positive enough.
pub fn growth_upper_bound(m: u64, n: usize) -> Option<f64> {
    let loglog = (n as f64).ln().ln();
    (loglog >= spectral::MIN_LOGLOG).then(|| 4.0 * m as f64 * n as f64 / loglog)
}

/// `(d + 2) / (2d + 2)`, the per-layer fill bound on transitive bases.
pub fn transitive_fill_bound(d: usize) -> f64 {
    (d as f64 + 2.0) / (2.0 * d as f64 + 2.0)
}

pub fn estimate_t(sweep: &Sweep) -> TReport {
    let (n, d) = (sweep.n, sweep.d);
    let per_m = sweep
        .config
        .target_layers
        .iter()
        .map(|&m| {
            let samples: Vec<f64> = sweep.runs.iter().map(|r| r.first_touch[m as usize] as f64).collect();
            let summary = EstimateSummary::from_samples(&samples, 0);
            let mut checks = vec![BoundCheck::new(format!("T_{m} >= m"), m as f64, Direction::AtLeast, summary)];
            match growth_upper_bound(m, n) {
                Some(b) => checks.push(BoundCheck::descriptive(
                    format!("E[T_{m}] <= 4mn/loglog n"),
                    b,
                    Direction::AtMost,
                    summary,
                    "valid only for n > n0(d), which is not quantified",
                )),
                None => checks.push(BoundCheck::descriptive(
                    format!("E[T_{m}] <= 4mn/loglog n"),
                    f64::NAN,
                    Direction::AtMost,
                    summary,
                    "log log n is not positive for this n",
                )),
            }
            if sweep.transitive {
                checks.push(BoundCheck::new(
                    format!("E[T_{m}] <= m(d+2)n/(2d+2)"),
                    m as f64 * n as f64 * transitive_fill_bound(d),
                    Direction::AtMost,
                    summary,
                ));
            }
            TEstimate { m, summary, checks }
        })
        .collect();
    TReport { per_m, pathwise_monotone: sweep.runs.iter().all(ReplicaRun::monotone) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub m: u64,
    pub phi: u64,
    pub density: EstimateSummary,
    /// `T_{m + phi} / (m n)`.
    pub growth_ratio: EstimateSummary,
    /// `T_m / (m n)`.
    pub base_ratio: EstimateSummary,
    pub checks: Vec<BoundCheck>,
    /// `|D - T_{m+phi}/(mn)|` in combined standard errors.
    pub consistency_sigmas: f64,
    /// `T_m <= m n D(m) <= T_{m + phi}` in every replica.
    pub sandwich_holds: bool,
    /// `3 exp(-(1 - lambda) phi / (8n))`.
    pub leak_probability: f64,
    /// `(n + 1) p / q` with `q = (d+2)^-(n-1) n^-n`, the density error
    /// term from late sticks below `m`.
    pub leak_term: f64,
    pub warnings: Vec<String>,
}

impl DensityEstimate {
    pub fn consistent_within(&self, sigmas: f64) -> bool {
        self.consistency_sigmas <= sigmas
    }
}

/// `3 exp(-(1 - lambda) phi / (8n))`.
pub fn leak_probability(lambda: f64, phi: u64, n: usize) -> f64 {
    3.0 * (-(1.0 - lambda) * phi as f64 / (8.0 * n as f64)).exp()
}

pub fn estimate_density(sweep: &Sweep, lambda: f64) -> Vec<DensityEstimate> {
    let (n, d) = (sweep.n, sweep.d);
    let ln_q = -((n as f64 - 1.0) * (d as f64 + 2.0).ln() + n as f64 * (n as f64).ln());
    sweep
        .config
        .target_layers
        .iter()
        .map(|&m| {
            let readings: Vec<DensityReading> =
                sweep.runs.iter().map(|r| *r.density.iter().find(|x| x.m == m).expect("reading for every target")).collect();
            let mn = (m * n as u64) as f64;
            let density = EstimateSummary::from_samples(&readings.iter().map(|r| r.d_m).collect::<Vec<_>>(), 0);
            let growth_ratio =
                EstimateSummary::from_samples(&readings.iter().map(|r| r.t_m_prime as f64 / mn).collect::<Vec<_>>(), 0);
            let base_ratio = EstimateSummary::from_samples(&readings.iter().map(|r| r.t_m as f64 / mn).collect::<Vec<_>>(), 0);
            let se = (density.std_error.powi(2) + growth_ratio.std_error.powi(2)).sqrt();
            let gap = (density.mean - growth_ratio.mean).abs();
            let consistency_sigmas = if se > 0.0 { gap / se } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
            let sandwich_holds = readings.iter().all(|r| {
                let filled = r.d_m * mn;
                r.t_m as f64 <= filled + 1e-9 && filled <= r.t_m_prime as f64 + 1e-9
            });
            let phi = sweep.config.phi(m);
            let bound = transitive_fill_bound(d);
            let check = if sweep.transitive {
                BoundCheck::new(format!("D({m}) <= (d+2)/(2d+2)"), bound, Direction::AtMost, density)
            } else {
                BoundCheck::descriptive(
                    format!("D({m}) <= (d+2)/(2d+2)"),
                    bound,
                    Direction::AtMost,
                    density,
                    "proved for vertex-transitive bases only",
                )
            };
            let leak = leak_probability(lambda, phi, n);
            let mut warnings = Vec::new();
            if phi as f64 / m as f64 > 0.5 {
                warnings.push(format!("phi/m = {:.2} is large; D({m}) may still grow", phi as f64 / m as f64));
            }
            DensityEstimate {
                m,
                phi,
                density,
                growth_ratio,
                base_ratio,
                checks: vec![check],
                consistency_sigmas,
                sandwich_holds,
                leak_probability: leak,
                leak_term: ((n as f64 + 1.0).ln() + leak.ln() - ln_q).exp(),
                warnings,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewLayerReport {
    pub frequency: EstimateSummary,
    /// `(2d + 2) / ((d + 2) n)` on transitive bases.
    pub lower: Option<BoundCheck>,
    /// Vacant boundary sites on layer `M`.
    pub boundary_at_m: usize,
    /// `|boundary on layer M| / n^(1/10)` (the unknown constant set to 1).
    pub upper: BoundCheck,
    pub probes: Vec<ParticleOutcome>,
}

/// `(2d + 2) / ((d + 2) n)`.
pub fn new_layer_bound(d: usize, n: usize) -> f64 {
    (2.0 * d as f64 + 2.0) / ((d as f64 + 2.0) * n as f64)
}

/// Drops `trials` independent probe particles on `state` (which is left
/// unchanged) and measures how often they open a new layer.
pub fn estimate_new_layer_probability(
    state: &Cluster,
    trials: u64,
    seed: u64,
    opts: &DropOptions,
) -> Result<NewLayerReport, DlaError> {
    let mut rng = rng::from_seed(seed);
    let probes = (0..trials).map(|_| state.probe(&mut rng, opts)).collect::<Result<Vec<_>, _>>()?;
    let hits = probes.iter().filter(|o| o.new_layer).count() as u64;
    let frequency = EstimateSummary::from_counts(hits, trials, 0);
    let g = state.graph();
    let (n, d) = (g.n(), g.degree());
    let lower = g
        .transitive_hint()
        .then(|| BoundCheck::new("Pr[new layer] >= (2d+2)/((d+2)n)", new_layer_bound(d, n), Direction::AtLeast, frequency));
    let boundary_at_m = state.boundary_count(state.lowest_empty_layer());
    let upper = BoundCheck::descriptive(
        "Pr[new layer] <= C |boundary on layer M| / n^(1/10)",
        boundary_at_m as f64 / (n as f64).powf(0.1),
        Direction::AtMost,
        frequency,
        "constant C is not known; shown with C = 1",
    );
    Ok(NewLayerReport { frequency, lower, boundary_at_m, upper, probes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub gamma: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
}

/// Least squares fit of `log(E[T_m] / m)` against `log n` over `(n,
/// E[T_m])` pairs.
pub fn fit_growth_exponent(points: &[(usize, f64)], m: u64) -> Result<GrowthFit, ExperimentError> {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, t)| *n > 0 && t.is_finite() && *t > 0.0)
        .map(|&(n, t)| ((n as f64).ln(), (t / m as f64).ln()))
        .collect();
    let distinct: BTreeSet<u64> = finite.iter().map(|p| p.0.to_bits()).collect();
    if distinct.len() < 3 {
        return Err(ExperimentError::DegenerateFit(distinct.len()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = finite.into_iter().unzip();
    let fit = least_squares(&xs, &ys).ok_or(ExperimentError::DegenerateFit(xs.len()))?;
    Ok(GrowthFit { gamma: fit.slope, intercept: fit.intercept, residual_norm: fit.residual_norm(), residuals: fit.residuals })
}

/// Estimates `E[T_m]` on each base and fits the exponent.
pub fn fit_growth_exponent_for(
    specs: &[String],
    m: u64,
    replicas: u64,
    seed: u64,
) -> Result<(GrowthFit, Vec<(usize, EstimateSummary)>), ExperimentError> {
    let mut estimates = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let cfg = ExperimentConfig {
            graph: spec.clone(),
            target_layers: vec![m],
            replicas,
            seed: rng::derive_seed(seed, i as u64),
            density_overshoot: Some(1),
            ..ExperimentConfig::default()
        };
        let sweep = run_replicas(&cfg)?;
        let t = estimate_t(&sweep);
        estimates.push((sweep.n, t.per_m[0].summary));
    }
    let points: Vec<(usize, f64)> = estimates.iter().map(|(n, s)| (*n, s.mean)).collect();
    Ok((fit_growth_exponent(&points, m)?, estimates))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// At least a quarter of particles stick within `mu^2 / 4` steps.
    SmallKappa,
    ManySteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub mu: u64,
    pub nu: f64,
    pub kappa_threshold: f64,
    pub kappa_small_fraction: EstimateSummary,
    pub regime: Regime,
}

/// `floor(log n / (4 log log n))`.
pub fn mu(n: usize) -> u64 {
    let ln = (n as f64).ln();
    (ln / (4.0 * ln.ln())).floor().max(0.0) as u64
}

pub fn diagnostics(state: &Cluster, trials: u64, seed: u64, opts: &DropOptions) -> Result<Diagnostics, ExperimentError> {
    let n = state.n();
    if n < 16 {
        return Err(ExperimentError::GraphTooSmall(n));
    }
    let mu = mu(n);
    let threshold = (mu * mu) as f64 / 4.0;
    let mut rng = rng::from_seed(seed);
    let mut small = 0;
    for _ in 0..trials {
        small += u64::from(state.probe(&mut rng, opts)?.kappa as f64 <= threshold);
    }
    let fraction = EstimateSummary::from_counts(small, trials, 0);
    let regime = if fraction.mean >= 0.25 { Regime::SmallKappa } else { Regime::ManySteps };
    Ok(Diagnostics { mu, nu: (n as f64).ln(), kappa_threshold: threshold, kappa_small_fraction: fraction, regime })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DashboardEntry {
    pub graph: String,
    pub report: TReport,
    pub fast_mixing: Result<BoundCheck, SpectralError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dashboard {
    pub entries: Vec<DashboardEntry>,
    pub fit: GrowthFit,
}

impl Dashboard {
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.entries {
            out.push(format!("graph {}", e.graph));
            for t in &e.report.per_m {
                out.push(format!("  E[T_{}] = {}", t.m, t.summary));
                out.extend(t.checks.iter().map(|c| format!("    {c}")));
            }
            out.push(format!("  pathwise monotone T_m: {}", e.report.pathwise_monotone));
            match &e.fast_mixing {
                Ok(c) => out.push(format!("  {c}")),
                Err(err) => out.push(format!("  mixing hypothesis not evaluated: {err}")),
            }
        }
        let residuals: Vec<String> = self.fit.residuals.iter().map(|r| format!("{r:.6}")).collect();
        out.push(format!(
            "gamma = {:.6}, residual norm = {:.6}, residuals = [{}] (exploratory; no verdict)",
            self.fit.gamma,
            self.fit.residual_norm,
            residuals.join(", ")
        ));
        out
    }
}

/// Growth-time bounds, the fast-mixing hypothesis and the exponent fit
/// over a family of bases.
pub fn dashboard(specs: &[String], layers: &[u64], replicas: u64, seed: u64) -> Result<Dashboard, ExperimentError> {
    let mut entries = Vec::new();
    let mut points = Vec::new();
    let fit_m = *layers.iter().max().ok_or_else(|| ExperimentError::Config("no target layers".into()))?;
    for (i, spec) in specs.iter().enumerate() {
        let cfg = ExperimentConfig {
            graph: spec.clone(),
            target_layers: layers.to_vec(),
            replicas,
            seed: rng::derive_seed(seed, i as u64),
            density_overshoot: Some(1),
            ..ExperimentConfig::default()
        };
        let sweep = run_replicas(&cfg)?;
        let report = estimate_t(&sweep);
        let graph: RegularGraph = spec.parse::<GraphSpec>()?.build()?;
        let fast_mixing = spectral::mixing_time(&graph, 100_000).and_then(|t| {
            let profile = spectral::eigen_profile(&graph).with_mixing_time(t);
            spectral::check_fast_mixing(&profile)
        });
        let t_fit = report.per_m.iter().find(|t| t.m == fit_m).expect("fit layer is a target").summary.mean;
        points.push((sweep.n, t_fit));
        entries.push(DashboardEntry { graph: spec.clone(), report, fast_mixing });
    }
    Ok(Dashboard { entries, fit: fit_growth_exponent(&points, fit_m)? })
}

/// First line of every CSV file.
pub fn csv_header_comment(cfg: &ExperimentConfig) -> String {
    format!("# cyldla v1 config_hash={}\n", cfg.hash_hex())
}

pub fn growth_csv(sweep: &Sweep) -> String {
    let mut out = csv_header_comment(&sweep.config);
    out.push_str("replica,m,T_m\n");
    for r in &sweep.runs {
        for (m, t) in r.first_touch.iter().enumerate().skip(1) {
            let _ = writeln!(out, "{},{},{}", r.replica, m, t);
        }
    }
    out
}

pub fn density_csv(sweep: &Sweep) -> String {
    let mut out = csv_header_comment(&sweep.config);
    out.push_str("replica,m,phi,D_m\n");
    for r in &sweep.runs {
        for x in &r.density {
            let _ = writeln!(out, "{},{},{},{}", r.replica, x.m, x.phi, x.d_m);
        }
    }
    out
}

pub fn probes_csv(cfg: &ExperimentConfig, probes: &[ParticleOutcome]) -> String {
    let mut out = csv_header_comment(cfg);
    out.push_str("trial,kappa,H,new_layer,min_layer\n");
    for (i, o) in probes.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{},{}", i, o.kappa, o.h, u8::from(o.new_layer), o.min_layer_visited);
    }
    out
}

pub fn excursions_csv(cfg: &ExperimentConfig, alpha: f64, samples: &[ExcursionSample]) -> String {
    let mut out = csv_header_comment(cfg);
    out.push_str("trial,sign,g_steps,total_steps,alpha_long\n");
    for (i, s) in samples.iter().enumerate() {
        let sign = match s.sign {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Flat => "0",
        };
        let long = !s.capped && s.sign == Sign::Positive && s.g_steps as f64 >= alpha;
        let _ = writeln!(out, "{},{},{},{},{}", i, sign, s.g_steps, s.total_steps, u8::from(long));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub sweep: Sweep,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes `files` into `dir` atomically as a group: each goes to a
/// temporary name first, and everything written is removed on failure.
fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, body) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(io(&tmp)(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut done = Vec::new();
    for (tmp, dst) in &staged {
        if let Err(e) = fs::rename(tmp, dst) {
            cleanup(&staged);
            for p in &done {
                let _ = fs::remove_file(p);
            }
            return Err(io(dst)(e));
        }
        done.push(dst.clone());
    }
    Ok(done)
}

/// Runs all replicas and writes `growth.csv`, `density.csv` and, when
/// probes are requested, `probes.csv` into `dir`.
pub fn run_sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<SweepOutput, ExperimentError> {
    let warnings = cfg.validate()?;
    let sweep = run_replicas(cfg)?;
    let mut files = vec![("growth.csv", growth_csv(&sweep)), ("density.csv", density_csv(&sweep))];
    if cfg.probes > 0 {
        let cylinder = cfg.cylinder()?;
        let mut rng = rng::from_seed(rng::derive_seed(cfg.seed, PROBE_SALT));
        let mut state = Cluster::new(cylinder);
        let top = *cfg.target_layers.iter().max().expect("validated");
        state.grow(GrowUntil::Layer(top), &mut rng, &cfg.drop_options())?;
        let report = estimate_new_layer_probability(&state, cfg.probes, rng::derive_seed(cfg.seed, PROBE_SALT + 1), &cfg.drop_options())?;
        files.push(("probes.csv", probes_csv(cfg, &report.probes)));
    }
    let files = write_all(dir, &files)?;
    Ok(SweepOutput { sweep, files, warnings })
}
