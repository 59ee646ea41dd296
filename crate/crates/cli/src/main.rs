//! `cyldla`: graphs, spectra, excursion statistics, DLA sweeps, self-check
//! suites and cluster pictures from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cyldla", version, about = "Diffusion limited aggregation on cylinders over regular graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SeedArg {
    /// Base seed for every random stream
    #[arg(long, env = "CYLDLA_SEED", hide_env_values = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph, validate it and print its edge list
    GenGraph {
        /// Graph such as cycle:16, torus:5x5, complete:8, hypercube:4, random:100:3:seed=7; append +loops for self loops
        graph: String,
        /// Write the edge list here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectrum of the simple random walk as a one-row CSV: n, d, lambda, gap, mixing_time
    Spectra {
        /// Graph spec, as for gen-graph
        graph: String,
        /// Give up on the mixing time after this many lazy steps
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
        /// Also list every eigenvalue on standard error
        #[arg(long)]
        all: bool,
    },
    /// Same one-row CSV as spectra, plus the fast-mixing threshold check on standard error
    Mixing {
        /// Graph spec, as for gen-graph
        graph: String,
        /// Give up after this many lazy steps
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
    },
    /// Frequency of long excursions away from a reference layer
    Excursions {
        /// Base graph spec; only its degree matters
        graph: String,
        /// Comma-separated thresholds on base-graph moves
        #[arg(long, value_delimiter = ',', default_value = "2,4,16")]
        alpha: Vec<f64>,
        /// Excursions sampled per alpha
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// How excursions are sampled
        #[arg(long, value_enum, default_value_t = ExcursionModeArg::Explicit)]
        mode: ExcursionModeArg,
        /// Reference layer height for explicit sampling
        #[arg(long, default_value_t = 1_000_000)]
        offset: u64,
        /// Step cap per excursion for explicit sampling
        #[arg(long, default_value_t = 100_000_000)]
        cap: u64,
        /// Write one CSV of samples per alpha into this directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Grow independent clusters and write growth, density and probe tables
    Simulate(SweepArgs),
    /// Density of the grown cluster below layer m, with its bound and consistency checks
    Density(SweepArgs),
    /// Run a self-check suite; exits nonzero when any check fails
    Verify {
        /// Which suite to run
        #[arg(value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Draw a cluster snapshot as a pixel map or a layer-load chart
    Render {
        /// Snapshot file written by simulate --snapshot
        snapshot: PathBuf,
        /// Pixel map (cycle bases only) or layer-load bars
        #[arg(long, value_enum, default_value_t = StyleArg::Pixels)]
        style: StyleArg,
        /// Pixels per site for the pixel map
        #[arg(long, default_value_t = 1)]
        scale: usize,
        /// Output file; the extension is chosen from the format when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound dashboard and growth exponent fit over a family of graphs
    FitGamma {
        /// Graphs of increasing size, at least three
        #[arg(required = true, num_args = 1..)]
        graphs: Vec<String>,
        /// Comma-separated layers; the largest one is used for the fit
        #[arg(long, value_delimiter = ',', default_value = "5")]
        layers: Vec<u64>,
        /// Independent clusters per graph
        #[arg(long, default_value_t = 20)]
        replicas: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    /// Base graph; may instead come from the config file
    pub graph: Option<String>,
    /// TOML config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated target layers m
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<u64>>,
    /// Independent clusters to grow
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Base seed [default: 1, or CYLDLA_SEED]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap on simulated steps per particle
    #[arg(long)]
    pub cap: Option<u64>,
    /// Extra layers grown past m before reading the density
    #[arg(long)]
    pub overshoot: Option<u64>,
    /// Probe particles dropped on a cluster grown to the top target layer
    #[arg(long)]
    pub probes: Option<u64>,
    /// Simulate every step instead of sampling trips above the cluster exactly
    #[arg(long)]
    pub no_accelerate: bool,
    /// Output directory for CSV files; without it the growth table goes to standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also grow one cluster and save its snapshot here
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExcursionModeArg {
    /// Step by step from a high reference layer
    Explicit,
    /// Exact sampling through the first-passage law
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Walk1d,
    Spectral,
    Dla,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StyleArg {
    Pixels,
    Bars,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
