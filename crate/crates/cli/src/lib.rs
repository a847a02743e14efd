//! Experiment runner for the `mi-isac` library.
//!
//! Each subcommand resolves a flat key/value configuration (defaults, then an
//! optional file, then `--set` and the dedicated flags), validates it, computes
//! a [`output::Report`] and only then writes it, so validation failures never
//! leave partial files behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mi_isac::MiError;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

use config::{ExperimentConfig, RawConfig};

/// Environment variable capping sweep parallelism (0 = automatic).
pub const THREADS_ENV: &str = "MI_ISAC_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(MiError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 I/O, 2 configuration, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<MiError> for CliError {
    fn from(e: MiError) -> Self {
        match e {
            MiError::InvalidParameter { .. }
            | MiError::NonUnitDirection { .. }
            | MiError::NonFiniteGeometry { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mi-isac",
    version,
    about = "Magneto-inductive near-field ISAC experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the channel matrix, coil constant and coupling-tensor spectrum.
    Channel,
    /// Range bound and Monte Carlo MLE error versus distance.
    CrbCurve,
    /// Numeric Fisher-information rank for each configured geometry.
    FimRank,
    /// Coupling-gradient versus time-of-flight range resolution.
    Resolution,
    /// Sensing-gain decomposition over the α × SNR grid.
    IsacGain,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Channel => "channel",
            Command::CrbCurve => "crb-curve",
            Command::FimRank => "fim-rank",
            Command::Resolution => "resolution",
            Command::IsacGain => "isac-gain",
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file with `key = value` lines and optional `[section]` headers.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Emit a JSON array of records instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// sweep.seed
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// medium.conductivity_s_per_m
    #[arg(long, global = true)]
    pub conductivity: Option<String>,
    /// carrier.frequency_hz
    #[arg(long, global = true)]
    pub frequency: Option<String>,
    /// carrier.bandwidth_hz
    #[arg(long, global = true)]
    pub bandwidth: Option<String>,
    /// geometry.range_m
    #[arg(long, global = true)]
    pub range: Option<String>,
    /// geometry.theta_rad
    #[arg(long, global = true)]
    pub theta: Option<String>,
    /// geometry.phi_rad
    #[arg(long, global = true)]
    pub phi: Option<String>,
    /// sweep.trials
    #[arg(long, global = true)]
    pub trials: Option<String>,
    /// coil.axes (`tri` or `single`)
    #[arg(long, global = true)]
    pub axes: Option<String>,
}

impl CommonArgs {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        if let Some(path) = &self.config {
            raw.merge_file(path)?;
        }
        for assignment in &self.set {
            raw.apply_assignment(assignment)?;
        }
        let flags = [
            ("sweep.seed", &self.seed),
            ("medium.conductivity_s_per_m", &self.conductivity),
            ("carrier.frequency_hz", &self.frequency),
            ("carrier.bandwidth_hz", &self.bandwidth),
            ("geometry.range_m", &self.range),
            ("geometry.theta_rad", &self.theta),
            ("geometry.phi_rad", &self.phi),
            ("sweep.trials", &self.trials),
            ("coil.axes", &self.axes),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        Ok(raw)
    }
}

/// Parallelism cap from [`THREADS_ENV`]; unset means automatic.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// Resolves the configuration and renders the command output without writing it.
pub fn render(cli: &Cli, threads: usize) -> Result<String, CliError> {
    let raw = cli.common.resolve()?;
    let cfg = ExperimentConfig::from_raw(raw, threads)?;
    let report = commands::run(&cli.command, &cfg)?;
    Ok(if cli.common.json {
        report.to_json()
    } else {
        report.to_csv(&cfg.raw)
    })
}

pub fn run(cli: &Cli, threads: usize) -> Result<(), CliError> {
    let text = render(cli, threads)?;
    match &cli.common.out {
        Some(path) => write_atomic(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Writes through a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}
