//! Command-line pipeline: generate, messify, reconstruct, validate, report.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use primecvd::ErrorClass;

pub mod audit;
pub mod commands;
pub mod config;
pub mod tables;
pub mod tolerances;
pub mod validate;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] primecvd::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data contract violation: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::DataContract => 2,
                ErrorClass::Numerical => 3,
            },
            CliError::Io { .. } | CliError::Data(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "primecvd", version, about = "Synthetic cardiovascular cohort pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cohort size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Tolerance manifest used by `validate`.
    #[arg(long, global = true)]
    pub tolerances: Option<PathBuf>,
    #[arg(long, global = true)]
    pub target_incidence: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the clean cohort and write data_asset_1.csv.
    Generate,
    /// Split a clean cohort into three messy EMR tables.
    Messify {
        /// Clean cohort CSV [default: <out>/data_asset_1.csv].
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Rebuild an analysis cohort from the EMR tables.
    Reconstruct {
        #[arg(long)]
        master: Option<PathBuf>,
        #[arg(long)]
        chronic: Option<PathBuf>,
        #[arg(long)]
        measurements: Option<PathBuf>,
        /// Clean cohort to audit the reconstruction against.
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Compute validation tables and judge them against the tolerance manifest.
    Validate(InputArgs),
    /// Write a plain-text report.
    Report(InputArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Clean cohort CSV [default: <out>/data_asset_1.csv].
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Reconstructed cohort [default: <out>/reconstructed_cohort.csv if present].
    #[arg(long)]
    pub reconstructed: Option<PathBuf>,
    /// Directory holding the EMR tables [default: <out>].
    #[arg(long)]
    pub emr_dir: Option<PathBuf>,
}

/// Resolve the effective configuration: built-in defaults, then the config
/// file, then flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.n {
        cfg.n = v;
    }
    if let Some(v) = &global.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &global.lexicon {
        cfg.lexicon = Some(v.clone());
    }
    if let Some(v) = &global.tolerances {
        cfg.tolerances = Some(v.clone());
    }
    if let Some(v) = global.target_incidence {
        cfg.target_incidence = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    commands::dispatch(&cli.command, &cfg)
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
