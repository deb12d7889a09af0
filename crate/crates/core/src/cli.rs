//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 numerical
//! run-level failure, 4 I/O error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::scenarios::{self, RunMeta, RunOptions, ScenarioConfig, ScenarioKind};

#[derive(Debug, Parser)]
#[command(name = "nearfar", version, about = "Near-field / far-field model mismatch maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Localisation mismatch (MME) map.
    MmeMap(RunArgs),
    /// Channel-estimation covariance-mismatch map.
    ChestMap(RunArgs),
    /// Required-SNR mismatch map.
    SerMap(RunArgs),
    /// Metric report at probe positions.
    Metrics(RunArgs),
    /// Print the Fraunhofer distance of a ULA.
    Fraunhofer(FraunhoferArgs),
    /// Check a config file and exit.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct FraunhoferArgs {
    /// Take the array from a config instead of the flags below.
    #[arg(long, conflicts_with_all = ["n_antennas", "spacing_wavelengths", "spacing_m", "carrier_hz"])]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_antennas: Option<usize>,
    #[arg(long, conflicts_with = "spacing_m")]
    pub spacing_wavelengths: Option<f64>,
    #[arg(long)]
    pub spacing_m: Option<f64>,
    #[arg(long)]
    pub carrier_hz: Option<f64>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        Error::Io(_) => 4,
        Error::NumericalFailure(_) | Error::NoSolution(_) | Error::DegenerateGeometry(_) | Error::RunFailure { .. } => 3,
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::MmeMap(a) => run(a, ScenarioKind::MmeMap),
        Command::ChestMap(a) => run(a, ScenarioKind::ChestMap),
        Command::SerMap(a) => run(a, ScenarioKind::SerMap),
        Command::Metrics(a) => run(a, ScenarioKind::MetricsReport),
        Command::Fraunhofer(a) => fraunhofer(a),
        Command::Validate(a) => {
            let cfg = ScenarioConfig::from_path(&a.config).map_err(io_as_config)?;
            if !a.quiet {
                eprintln!("{}: ok ({})", a.config.display(), cfg.kind.as_str());
            }
            Ok(())
        }
    }
}

/// A missing or unreadable config is an argument problem, not an output failure.
fn io_as_config(e: Error) -> Error {
    match e {
        Error::Io(io) => Error::config("--config", io.to_string()),
        other => other,
    }
}

fn run(args: &RunArgs, kind: ScenarioKind) -> Result<()> {
    let mut cfg = ScenarioConfig::from_path(&args.config).map_err(io_as_config)?;
    if cfg.kind != kind {
        return Err(Error::config(
            "kind",
            format!("config is `{}` but the subcommand runs `{}`", cfg.kind.as_str(), kind.as_str()),
        ));
    }
    let config_sha256 = cfg.fingerprint();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let threads = match args.threads {
        Some(0) => return Err(Error::config("--threads", "must be >= 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let start = Instant::now();
    let table = scenarios::run_scenario(&cfg, &RunOptions { threads: Some(threads) })?;
    let wall = start.elapsed().as_secs_f64();

    scenarios::write_csv_file(&table, &args.out)?;
    let meta = RunMeta {
        kind: kind.as_str().to_string(),
        config_sha256,
        seed: cfg.seed,
        seed_overridden: args.seed.is_some(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: wall,
        threads,
        shards: table.rows.len(),
        cells: table.rows.len(),
        failed_cells: table.failed(),
    };
    scenarios::write_meta(&meta, &scenarios::sidecar_path(&args.out))?;
    if !args.quiet {
        eprintln!(
            "{}: {} cells, {} failed, {:.2} s -> {}",
            kind.as_str(),
            meta.cells,
            meta.failed_cells,
            wall,
            args.out.display()
        );
    }
    table.check_failures()
}

fn fraunhofer(a: &FraunhoferArgs) -> Result<()> {
    let geom = match &a.config {
        Some(path) => ScenarioConfig::from_path(path).map_err(io_as_config)?.geometry()?,
        None => {
            let n = a.n_antennas.ok_or_else(|| Error::config("--n-antennas", "required"))?;
            let fc = a.carrier_hz.ok_or_else(|| Error::config("--carrier-hz", "required"))?;
            match (a.spacing_wavelengths, a.spacing_m) {
                (Some(s), None) => ArrayGeometry::ula_wavelengths(n, s, fc)?,
                (None, Some(s)) => ArrayGeometry::ula(n, s, fc)?,
                _ => {
                    return Err(Error::config(
                        "--spacing-wavelengths",
                        "give exactly one of --spacing-wavelengths and --spacing-m",
                    ))
                }
            }
        }
    };
    let df = geom.fraunhofer_distance(geom.carrier_wavelength())?;
    println!("{df:.4} m");
    if !a.quiet {
        eprintln!("aperture {:.4} m, wavelength {:.6} m", geom.aperture(), geom.carrier_wavelength());
    }
    Ok(())
}
