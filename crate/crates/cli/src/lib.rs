//! Command-line front end: coherence analysis, condition tables, recovery,
//! dictionary generation and Monte-Carlo experiments.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use piecewise_core::dictionary::load_dictionary;
use piecewise_core::{BlockPartition, Dictionary};

pub mod analyze;
pub mod bounds;
pub mod experiment;
pub mod generate;
pub mod recover;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] piecewise_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "piecewise",
    version,
    about = "Coherence analysis and recovery of piecewise sparse signals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherence profile and condition report of a dictionary, as JSON.
    Analyze(analyze::AnalyzeArgs),
    /// Condition bounds and feasibility grids, as CSV.
    Bounds(bounds::BoundsArgs),
    /// Solve A x = b with OMP, basis pursuit or exhaustive search; JSON result.
    Recover(recover::RecoverArgs),
    /// Monte-Carlo recovery experiment driven by a JSON config.
    Experiment(experiment::ExperimentArgs),
    /// Write a generated dictionary (and optionally a signal) to disk.
    Generate(generate::GenerateArgs),
}

/// Dictionary from a CSV file plus its block widths.
#[derive(Debug, Clone, Args)]
pub struct DictArgs {
    /// Matrix CSV, one row per line, no header.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Block widths, e.g. `8,8`. Defaults to a single block.
    #[arg(long, conflicts_with = "partition")]
    pub widths: Option<String>,
    /// Partition JSON `{"widths":[...]}`.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Rescale columns to unit norm instead of rejecting them.
    #[arg(long)]
    pub normalize: bool,
}

impl DictArgs {
    pub fn load(&self) -> CliResult<(Dictionary, bool)> {
        let text = fs::read_to_string(&self.matrix).map_err(|e| piecewise_core::Error::Io {
            path: self.matrix.display().to_string(),
            source: e,
        })?;
        let ncols = piecewise_core::dictionary::parse_matrix_csv(&text)?.ncols();
        let partition = match (&self.widths, &self.partition) {
            (Some(w), _) => BlockPartition::parse_widths(w)?,
            (None, Some(p)) => BlockPartition::load_json(p)?,
            (None, None) => BlockPartition::single(ncols)?,
        };
        let (d, rec) = load_dictionary(&self.matrix, partition, self.normalize)?;
        Ok((d, rec.is_some()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Omp,
    Bp,
    L0,
}

/// Writes `content` to `out`, or to stdout when `out` is `None`.
pub fn emit(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, content: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, content).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Parses a comma separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| CliError::Usage(format!("bad {what} {t:?}: {e}")))
        })
        .collect()
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze(a) => analyze::run(&a),
        Command::Bounds(a) => bounds::run(&a),
        Command::Recover(a) => recover::run(&a),
        Command::Experiment(a) => experiment::run(&a),
        Command::Generate(a) => generate::run(&a),
    }
}
