//! `homduet`: simulate, analyze and sweep HOM experiments from one config file.

mod analyze;
mod manifest;
mod plot;
mod simulate;
mod sweep;

use clap::{Parser, Subcommand, ValueEnum};
use homduet_core::config::ExperimentConfig;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

pub const TOOL_VERSION: &str = env!("HOMDUET_TOOL_VERSION");
pub const SEED_ENV: &str = "HOMDUET_SEED";

#[derive(Debug, Parser)]
#[command(name = "homduet", version = TOOL_VERSION, about = "Two-node HOM interference simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one or all run modes and write timestamp files with manifests.
    Simulate(simulate::SimulateArgs),
    /// Analyze timestamp files into HOM reports and histograms.
    Analyze(analyze::AnalyzeArgs),
    /// Run a parameter sweep, one simulated and analyzed point per value.
    Sweep(sweep::SweepArgs),
    /// Print the default configuration as TOML.
    InitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Runtime(String),
    Statistics(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Statistics(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Statistics(m) => write!(f, "insufficient statistics: {m}"),
        }
    }
}

impl From<homduet_core::Error> for CliError {
    fn from(e: homduet_core::Error) -> Self {
        use homduet_core::Error as E;
        match e {
            E::Config { .. } | E::InvalidParameter { .. } => CliError::Config(e.to_string()),
            E::InsufficientStatistics(m) => CliError::Statistics(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_context(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Loads a config and applies the seed override from the environment.
pub fn load_config(path: &PathBuf) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s.trim().parse().map_err(|_| {
            CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
        })?;
    }
    Ok(cfg)
}

/// Hash of the physical configuration: run mode, seed, duration and output
/// directory are excluded so that matching runs of one setup compare equal.
pub fn setup_hash(cfg: &ExperimentConfig) -> [u8; 32] {
    let mut c = cfg.with_mode(homduet_core::RunMode::Dist);
    c.seed = 0;
    c.duration_s = 0.0;
    c.output.dir.clear();
    c.hash()
}

pub fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_context(path))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::InitConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("homduet: {e}");
            ExitCode::from(e.code())
        }
    }
}
