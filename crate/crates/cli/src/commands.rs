use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cyldla::dla::{Cluster, DlaError, GrowUntil};
use cyldla::experiment::{self, ExperimentConfig, ExperimentError};
use cyldla::graph::{self, GraphError};
use cyldla::render::{self, RenderStyle};
use cyldla::snapshot::Snapshot;
use cyldla::spectral::{self, EigenMethod, MixingTime};
use cyldla::verify::{self, Suite};
use cyldla::walk::{self, Cylinder, ExcursionMode};
use cyldla::rng;
use thiserror::Error;

use crate::{Command, ExcursionModeArg, StyleArg, SuiteArg, SweepArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    CapExceeded(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::CapExceeded(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DlaError> for CliError {
    fn from(e: DlaError) -> Self {
        match e {
            DlaError::CapExceeded { .. } => CliError::CapExceeded(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_cap_exceeded() {
            return CliError::CapExceeded(e.to_string());
        }
        match e {
            ExperimentError::Graph(_)
            | ExperimentError::Config(_)
            | ExperimentError::DegenerateFit(_)
            | ExperimentError::GraphTooSmall(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))
}

fn echo(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("# resolved {}", line.join(" "));
}

pub fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::GenGraph { graph, out } => gen_graph(&graph, out.as_deref()),
        Command::Spectra { graph, cap, all } => spectra(&graph, cap, all),
        Command::Mixing { graph, cap } => mixing(&graph, cap),
        Command::Excursions { graph, alpha, trials, mode, offset, cap, out, seed } => {
            let mode = match mode {
                ExcursionModeArg::Explicit => ExcursionMode::Explicit { offset, cap },
                ExcursionModeArg::Exact => ExcursionMode::Exact,
            };
            excursions(&graph, &alpha, trials, mode, out.as_deref(), seed.seed)
        }
        Command::Simulate(args) => simulate(&args),
        Command::Density(args) => density(&args),
        Command::Verify { suite, seed } => verify_cmd(suite, seed.seed),
        Command::Render { snapshot, style, scale, out } => render_cmd(&snapshot, style, scale, out),
        Command::FitGamma { graphs, layers, replicas, seed } => fit_gamma(&graphs, &layers, replicas, seed.seed),
    }
}

fn gen_graph(spec: &str, out: Option<&Path>) -> Result<ExitCode, CliError> {
    echo(&[("graph", spec.to_string()), ("out", out.map_or("-".into(), |p| p.display().to_string()))]);
    let g = graph::from_spec(spec)?;
    let report = g.validate();
    for (name, ok) in report.lines() {
        eprintln!("{} {name}", if ok { "PASS" } else { "FAIL" });
    }
    let body = format!("# {} n={} d={}\n{}", g.label(), g.n(), g.degree(), g.edge_list());
    match out {
        Some(p) => write_file(p, body.as_bytes())?,
        None => print!("{body}"),
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// The single-row table shared by `spectra` and `mixing`.
fn spectrum_row(spec: &str, cap: u64) -> Result<(spectral::SpectralProfile, cyldla::RegularGraph), CliError> {
    let g = graph::from_spec(spec)?;
    let t = spectral::mixing_time(&g, cap).map_err(|e| CliError::Failed(e.to_string()))?;
    let p = spectral::eigen_profile(&g).with_mixing_time(t);
    let mixing = match t {
        MixingTime::Steps(s) => s.to_string(),
        MixingTime::ExceededCap(c) => format!("exceeded:{c}"),
    };
    println!("n,d,lambda,gap,mixing_time");
    println!("{},{},{:.12},{:.12},{mixing}", p.n, p.d, p.lambda, p.gap);
    Ok((p, g))
}

fn spectra(spec: &str, cap: u64, all: bool) -> Result<ExitCode, CliError> {
    echo(&[("graph", spec.to_string()), ("cap", cap.to_string()), ("all", all.to_string())]);
    let (p, g) = spectrum_row(spec, cap)?;
    let method = match p.method {
        EigenMethod::Dense => "dense",
        EigenMethod::PowerIteration => "power-iteration",
    };
    let bipartite = g.bipartition().is_some();
    eprintln!("# method={method} lambda_2={:.12} lambda_min={:.12} bipartite={bipartite}", p.lambda_2(), p.lambda_min());
    eprintln!("# lambda within parity class = {:.12}", p.lambda_within_parity(bipartite));
    if all {
        for (i, x) in p.eigenvalues.iter().enumerate() {
            eprintln!("# eigenvalue {i} {x:.12}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn mixing(spec: &str, cap: u64) -> Result<ExitCode, CliError> {
    echo(&[("graph", spec.to_string()), ("cap", cap.to_string())]);
    let (p, _) = spectrum_row(spec, cap)?;
    match spectral::fast_mixing_threshold(p.n) {
        Ok(th) => eprintln!("# fast-mixing threshold log^2 n / (log log n)^5 = {th:.6}"),
        Err(e) => eprintln!("# fast-mixing threshold undefined: {e}"),
    }
    match spectral::check_fast_mixing(&p) {
        Ok(check) => eprintln!("# {check}"),
        Err(e) => eprintln!("# fast-mixing check not evaluated: {e}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn excursions(
    spec: &str,
    alphas: &[f64],
    trials: u64,
    mode: ExcursionMode,
    out: Option<&Path>,
    seed: u64,
) -> Result<ExitCode, CliError> {
    let mode_text = match mode {
        ExcursionMode::Explicit { offset, cap } => format!("explicit offset={offset} cap={cap}"),
        ExcursionMode::Exact => "exact".into(),
    };
    echo(&[
        ("graph", spec.to_string()),
        ("alpha", alphas.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        ("trials", trials.to_string()),
        ("mode", mode_text),
        ("seed", seed.to_string()),
    ]);
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let cyl = Cylinder::new(graph::from_spec(spec)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("creating {}: {e}", dir.display())))?;
    }
    for (i, &alpha) in alphas.iter().enumerate() {
        let r = walk::long_excursion_frequency(&cyl, alpha, trials, rng::derive_seed(seed, i as u64), mode)
            .map_err(|e| CliError::Config(e.to_string()))?;
        println!("{}", r.positive);
        println!(
            "  negative {alpha}-long frequency {}; symmetric within 3 sigma: {}; capped {}; reached layer 0 {}",
            r.negative,
            r.symmetric_within(3.0),
            r.capped,
            r.touched_floor
        );
        if let Some(dir) = out {
            let cfg = ExperimentConfig {
                graph: spec.to_string(),
                seed,
                alphas: vec![alpha],
                step_cap: match mode {
                    ExcursionMode::Explicit { cap, .. } => cap,
                    ExcursionMode::Exact => 0,
                },
                ..ExperimentConfig::default()
            };
            let path = dir.join(format!("excursions_alpha{alpha}.csv"));
            write_file(&path, experiment::excursions_csv(&cfg, alpha, &r.samples).as_bytes())?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Config file first, then flags on top, then the environment seed if
/// neither gave one.
fn resolve(args: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let (mut cfg, file_seed) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
            let has_seed = text.parse::<toml::Table>().map(|t| t.contains_key("seed")).unwrap_or(false);
            let cfg: ExperimentConfig =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (cfg, has_seed)
        }
        None => (ExperimentConfig { graph: String::new(), ..ExperimentConfig::default() }, false),
    };
    if let Some(g) = &args.graph {
        cfg.graph = g.clone();
    }
    if cfg.graph.is_empty() {
        return Err(CliError::Config("no graph given (pass one or set `graph` in the config file)".into()));
    }
    if let Some(l) = &args.layers {
        cfg.target_layers = l.clone();
    }
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    match args.seed {
        Some(s) => cfg.seed = s,
        None if !file_seed => {
            if let Ok(env) = std::env::var("CYLDLA_SEED") {
                cfg.seed = env.trim().parse().map_err(|_| CliError::Config(format!("CYLDLA_SEED={env} is not a seed")))?;
            }
        }
        None => {}
    }
    if let Some(c) = args.cap {
        cfg.step_cap = c;
    }
    if let Some(o) = args.overshoot {
        cfg.density_overshoot = Some(o);
    }
    if let Some(p) = args.probes {
        cfg.probes = p;
    }
    if args.no_accelerate {
        cfg.accelerate = false;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    for line in cfg.canonical().lines() {
        eprintln!("# resolved {line}");
    }
    eprintln!("# config_hash={}", cfg.hash_hex());
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn write_snapshot(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let top = cfg.target_layers.iter().map(|&m| m + cfg.phi(m)).max().expect("validated");
    let mut cluster = Cluster::new(cfg.cylinder()?);
    cluster.grow(GrowUntil::Layer(top), &mut rng::split(cfg.seed, 0), &cfg.drop_options())?;
    write_file(path, Snapshot::from_cluster(&cluster).to_text().as_bytes())?;
    println!("wrote {} (replica 0, t={}, M={})", path.display(), cluster.t(), cluster.lowest_empty_layer());
    Ok(())
}

fn simulate(args: &SweepArgs) -> Result<ExitCode, CliError> {
    let cfg = resolve(args)?;
    let sweep = match &cfg.output {
        Some(dir) => {
            let out = experiment::run_sweep(&cfg, dir)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            out.sweep
        }
        None => {
            let sweep = experiment::run_replicas(&cfg)?;
            print!("{}", experiment::growth_csv(&sweep));
            sweep
        }
    };
    let report = experiment::estimate_t(&sweep);
    let mut lines = Vec::new();
    for t in &report.per_m {
        lines.push(format!("E[T_{}] = {}", t.m, t.summary));
        lines.extend(t.checks.iter().map(|c| format!("  {c}")));
    }
    lines.push(format!("pathwise monotone T_m in every replica: {}", report.pathwise_monotone));
    for l in lines {
        if cfg.output.is_some() {
            println!("{l}");
        } else {
            eprintln!("{l}");
        }
    }
    if let Some(path) = &args.snapshot {
        write_snapshot(&cfg, path)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn density(args: &SweepArgs) -> Result<ExitCode, CliError> {
    let cfg = resolve(args)?;
    let sweep = match &cfg.output {
        Some(dir) => {
            let out = experiment::run_sweep(&cfg, dir)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            out.sweep
        }
        None => experiment::run_replicas(&cfg)?,
    };
    let lambda = spectral::eigen_profile(&graph::from_spec(&cfg.graph)?).lambda;
    for e in experiment::estimate_density(&sweep, lambda) {
        println!("m={} phi={}", e.m, e.phi);
        println!("  D(m) = {}", e.density);
        println!("  T_(m+phi)/(mn) = {}", e.growth_ratio);
        println!("  T_m/(mn) = {}", e.base_ratio);
        for c in &e.checks {
            println!("  {c}");
        }
        println!(
            "  D(m) vs T_(m+phi)/(mn): {:.3} combined sigmas apart; agree within 3 sigma: {}",
            e.consistency_sigmas,
            e.consistent_within(3.0)
        );
        println!("  T_m <= filled sites below m <= T_(m+phi) in every replica: {}", e.sandwich_holds);
        println!("  leak probability bound {:.6e}, leak term {:.6e}", e.leak_probability, e.leak_term);
        for w in &e.warnings {
            println!("  warning: {w}");
        }
    }
    if let Some(path) = &args.snapshot {
        write_snapshot(&cfg, path)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(suite: SuiteArg, seed: u64) -> Result<ExitCode, CliError> {
    let (suite, name) = match suite {
        SuiteArg::Walk1d => (Suite::Walk1d, "walk1d"),
        SuiteArg::Spectral => (Suite::Spectral, "spectral"),
        SuiteArg::Dla => (Suite::Dla, "dla"),
        SuiteArg::All => (Suite::All, "all"),
    };
    echo(&[("suite", name.to_string()), ("seed", seed.to_string())]);
    let lines = verify::run(suite, seed);
    for l in &lines {
        println!("{l}");
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("{} checks, {failed} failed", lines.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn render_cmd(path: &Path, style: StyleArg, scale: usize, out: Option<PathBuf>) -> Result<ExitCode, CliError> {
    let style = match style {
        StyleArg::Pixels => RenderStyle::Pixels,
        StyleArg::Bars => RenderStyle::Bars,
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let snap = Snapshot::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let img = render::render(&snap, style, scale);
    let out = out.unwrap_or_else(|| path.with_extension(img.format.extension()));
    echo(&[
        ("snapshot", path.display().to_string()),
        ("style", format!("{style:?}").to_lowercase()),
        ("scale", scale.to_string()),
        ("out", out.display().to_string()),
    ]);
    if let Some(w) = &img.warning {
        eprintln!("warning: {w}");
    }
    write_file(&out, &img.bytes)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn fit_gamma(graphs: &[String], layers: &[u64], replicas: u64, seed: u64) -> Result<ExitCode, CliError> {
    echo(&[
        ("graphs", graphs.join(",")),
        ("layers", layers.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
        ("replicas", replicas.to_string()),
        ("seed", seed.to_string()),
    ]);
    if graphs.len() < 3 {
        return Err(CliError::Config(format!("need at least 3 graphs for a fit, got {}", graphs.len())));
    }
    let dash = experiment::dashboard(graphs, layers, replicas, seed)?;
    for l in dash.lines() {
        println!("{l}");
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(graph: Option<&str>) -> SweepArgs {
        SweepArgs {
            graph: graph.map(str::to_string),
            config: None,
            layers: None,
            replicas: None,
            seed: None,
            cap: None,
            overshoot: None,
            probes: None,
            no_accelerate: false,
            out: None,
            snapshot: None,
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "graph = \"complete:5\"\nreplicas = 3\nseed = 9\ntarget_layers = [2, 4]\n").unwrap();
        let mut a = args(None);
        a.config = Some(path.clone());
        let cfg = resolve(&a).unwrap();
        assert_eq!((cfg.graph.as_str(), cfg.replicas, cfg.seed), ("complete:5", 3, 9));
        a.graph = Some("cycle:6".into());
        a.replicas = Some(7);
        a.seed = Some(2);
        let cfg = resolve(&a).unwrap();
        assert_eq!((cfg.graph.as_str(), cfg.replicas, cfg.seed), ("cycle:6", 7, 2));
        assert_eq!(cfg.target_layers, vec![2, 4]);
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        assert_eq!(resolve(&args(None)).unwrap_err().exit_code(), 2);
        assert_eq!(resolve(&args(Some("cycle:x"))).unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "graph = \"cycle:4\"\nunknown_key = 1\n").unwrap();
        let mut a = args(None);
        a.config = Some(path);
        assert_eq!(resolve(&a).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn cap_errors_map_to_exit_three() {
        let e = DlaError::CapExceeded { t: 1, cap: 1, start_g: 0, kappa: 1, min_layer: 1, max_layer: 1 };
        assert_eq!(CliError::from(e).exit_code(), 3);
    }
}
