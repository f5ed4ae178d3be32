//! Command-line driver.
//!
//! Exit codes: 0 all residuals within bounds, 1 a residual above its bound,
//! 2 configuration error, 3 degeneracy during the run (partial output is
//! still written).

pub mod config;
pub mod report;
pub mod runs;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Format, Mode, Overrides, Resolved, RunConfig};
use report::{Record, Report, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(
    name = "laxdyn",
    version,
    about = "Discrete isospectral and isomonodromic dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the isospectral step map and track spectral invariants.
    SimulateIsospectral(RunArgs),
    /// Iterate the shift-then-refactor map and track the type data.
    SimulateIsomonodromic(RunArgs),
    /// Iterate dPV in spectral coordinates, checked against the matrix route.
    DpvOrbit(RunArgs),
    /// Run the property checks over a range of seeds (fixed run lengths).
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of steps (default 20; ignored by `verify`).
    #[arg(long)]
    pub steps: Option<usize>,
    /// RNG seed for anything the config leaves unspecified.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Residual tolerance (default 1e-8).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Command {
    fn split(self) -> (Mode, RunArgs) {
        match self {
            Command::SimulateIsospectral(a) => (Mode::Isospectral, a),
            Command::SimulateIsomonodromic(a) => (Mode::Isomonodromic, a),
            Command::DpvOrbit(a) => (Mode::Dpv, a),
            Command::Verify(a) => (Mode::Verify, a),
        }
    }
}

fn resolve(mode: Mode, args: RunArgs) -> Result<Resolved, ConfigError> {
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        steps: args.steps,
        seed: args.seed,
        tol: args.tol,
        output: args.output,
        format: args.format,
    };
    Resolved::new(mode, config, overrides)
}

fn emit<R: Record>(cfg: &Resolved, report: &Report<R>) -> i32 {
    let written = (|| -> io::Result<()> {
        let mut out: Box<dyn Write> = match &cfg.output {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        report.write(cfg.format, &mut out, &mut io::stderr())
    })();
    if let Err(e) = written {
        log::error!("writing output: {e}");
        return EXIT_CONFIG;
    }
    if let Some(e) = &report.failure {
        log::error!("run stopped: {e}");
    }
    for m in report.metrics.iter().filter(|m| !m.ok()) {
        log::warn!("{} = {:e} violates bound {:e}", m.name, m.value, m.bound);
    }
    report.exit_code()
}

/// Parses `args`, runs the subcommand, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let (mode, args) = cli.command.split();
    let cfg = match resolve(mode, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    log::info!(
        "{:?}: steps={} seed={} tol={:e}",
        cfg.mode,
        cfg.steps,
        cfg.seed,
        cfg.tol
    );
    let outcome = match mode {
        Mode::Isospectral => runs::isospectral(&cfg).map(|r| emit(&cfg, &r)),
        Mode::Isomonodromic => runs::isomonodromic(&cfg).map(|r| emit(&cfg, &r)),
        Mode::Dpv => runs::dpv(&cfg).map(|r| emit(&cfg, &r)),
        Mode::Verify => Ok(emit(&cfg, &verify::verify(&cfg))),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}
