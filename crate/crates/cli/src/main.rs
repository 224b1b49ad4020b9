use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgecache::config::Config;
use edgecache::experiments::{self, parse_grid, ExperimentKind, ExperimentSpec};
use edgecache::Error;

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_SOLVER_FAILURE: u8 = 3;

/// Adversary-robust coded caching experiments. Writes CSV to --out or stdout
/// and a short summary to stdout (stderr when the CSV goes to stdout).
#[derive(Debug, Parser)]
#[command(name = "edgecache", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output path (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// `start:stop:step` or a comma list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha_grid: Option<String>,

    /// SBS radii in meters, `start:stop:step` or a comma list.
    #[arg(long, global = true)]
    r_grid: Option<String>,

    /// Cache sizes in files, `start:stop:step` or a comma list.
    #[arg(long, global = true)]
    cache_grid: Option<String>,

    /// Monte Carlo samples per coverage profile.
    #[arg(long, global = true)]
    samples: Option<u64>,

    /// Requests per simulated row.
    #[arg(long, global = true)]
    requests: Option<u64>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coverage areas and profile of the SBS grid.
    Gamma,
    /// Equilibrium placement at the configured alpha.
    Placement,
    /// Equilibrium and reference rates over the alpha grid.
    SweepAlpha,
    /// Alpha sweep for every SBS radius in the r grid.
    SweepR,
    /// Alpha sweep for every cache size in the cache grid.
    SweepCache,
    /// Tracked placement entries over the alpha grid and the two thresholds.
    Thresholds,
    /// Request-level simulation of the equilibrium placement per alpha.
    Simulate,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Gamma => ExperimentKind::Gamma,
            Command::Placement => ExperimentKind::Placement,
            Command::SweepAlpha => ExperimentKind::SweepAlpha,
            Command::SweepR => ExperimentKind::SweepR,
            Command::SweepCache => ExperimentKind::SweepCache,
            Command::Thresholds => ExperimentKind::Thresholds,
            Command::Simulate => ExperimentKind::Simulate,
        }
    }
}

/// Config keys settable from the command line.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long = "num_files", alias = "num-files", global = true)]
    num_files: Option<usize>,
    #[arg(long = "zipf_exponent", alias = "zipf-exponent", global = true)]
    zipf_exponent: Option<f64>,
    #[arg(long = "cache_size", alias = "cache-size", global = true)]
    cache_size: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(
        long = "fragments_per_file",
        alias = "fragments-per-file",
        global = true
    )]
    fragments_per_file: Option<usize>,
    #[arg(long = "mbs_radius_m", alias = "mbs-radius-m", global = true)]
    mbs_radius_m: Option<f64>,
    #[arg(long = "sbs_spacing_m", alias = "sbs-spacing-m", global = true)]
    sbs_spacing_m: Option<f64>,
    #[arg(long = "sbs_radius_m", alias = "sbs-radius-m", global = true)]
    sbs_radius_m: Option<f64>,
    #[arg(
        long = "user_density_per_m2",
        alias = "user-density-per-m2",
        global = true
    )]
    user_density_per_m2: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut Config) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            num_files,
            zipf_exponent,
            cache_size,
            alpha,
            fragments_per_file,
            mbs_radius_m,
            sbs_spacing_m,
            sbs_radius_m,
            user_density_per_m2
        );
    }
}

fn build_spec(cli: &Cli) -> edgecache::Result<ExperimentSpec> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cli.overrides.apply(&mut config);
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut spec = ExperimentSpec::new(cli.command.kind(), config);
    if let Some(g) = &cli.alpha_grid {
        spec.alpha_grid = parse_grid(g)?;
    }
    if let Some(g) = &cli.r_grid {
        spec.r_grid = parse_grid(g)?;
    }
    if let Some(g) = &cli.cache_grid {
        spec.cache_grid = parse_grid(g)?;
    }
    if let Some(s) = cli.samples {
        spec.samples = s;
    }
    if let Some(r) = cli.requests {
        spec.requests = r;
    }
    spec.validate()?;
    Ok(spec)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible | Error::Unbounded => EXIT_SOLVER_FAILURE,
        Error::Io(_) => 1,
        _ => EXIT_INVALID_CONFIG,
    }
}

fn run(cli: &Cli) -> edgecache::Result<bool> {
    let spec = build_spec(cli)?;
    let output = experiments::run(&spec)?;
    match &cli.out {
        Some(path) => {
            output
                .table
                .write_csv(BufWriter::new(File::create(path)?))?;
            let mut stdout = io::stdout().lock();
            for line in &output.summary {
                writeln!(stdout, "{line}")?;
            }
        }
        None => {
            output.table.write_csv(io::stdout().lock())?;
            let mut stderr = io::stderr().lock();
            for line in &output.summary {
                writeln!(stderr, "{line}")?;
            }
        }
    }
    Ok(!output.solver_failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: solver did not reach optimality on every row");
            ExitCode::from(EXIT_SOLVER_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
