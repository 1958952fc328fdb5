//! Batch front end: expands a parameter grid, evaluates every point on a
//! worker pool and writes the sorted rows as CSV or JSON.
//!
//! Exit codes: `0` when every row passes, `2` when some assertion fails and
//! `1` on configuration or output errors.

mod commands;
mod grid;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use commands::{Cell, Command, ResultRow, RunSettings};
pub use grid::{parse_grid_flag, Grid, GridValue};
pub use output::{render, Format, RunHeader};

/// Replicate count used by stochastic commands when none is given.
pub const DEFAULT_REPS: usize = 1000;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "WORKBENCH_THREADS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A run description, loaded from a JSON document and/or command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub grid: Grid,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    /// Worker threads; `0` lets the pool choose.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "workbench",
    version,
    about = "Exact and Monte Carlo checks of moment and generalization bounds"
)]
pub struct Args {
    /// bounds, chaos, partition, learn or tails; overrides the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads, 0 = automatic. Falls back to WORKBENCH_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Grid axis as key=v1,v2,...; replaces the same key from the config.
    #[arg(long = "grid", value_name = "KEY=V1,V2")]
    pub grid: Vec<String>,
}

impl Args {
    /// Loads the config file, if any, and applies the flags over it.
    pub fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.command.is_some() {
            config.command = self.command;
        }
        for flag in &self.grid {
            let (key, values) = parse_grid_flag(flag)?;
            config.grid.insert(key, values);
        }
        config.seed = self.seed.or(config.seed);
        config.reps = self.reps.or(config.reps);
        config.output = self.out.or(config.output);
        config.format = self.format.or(config.format);
        config.threads = match self.threads.or(config.threads) {
            Some(t) => Some(t),
            None => threads_from_env()?,
        };
        Ok(config)
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                CliError::Config(format!("{THREADS_ENV} must be an integer, got {v:?}"))
            })
        }
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub command: Command,
    pub rows: Vec<ResultRow>,
    pub header: Option<RunHeader>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        }
    }

    pub fn render(&self, format: Format) -> String {
        render(self.command, &self.rows, self.header, format)
    }
}

/// Evaluates every grid point and returns the rows sorted by parameter tuple.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let command = config
        .command
        .ok_or_else(|| CliError::Config("no command given".into()))?;
    let reps = config.reps.unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        return Err(CliError::Config("reps must be >= 1".into()));
    }
    let header = if command.is_stochastic() {
        let seed = config
            .seed
            .ok_or_else(|| CliError::Config(format!("{} needs a seed", command.as_str())))?;
        Some(RunHeader { seed, reps })
    } else {
        None
    };
    let points = commands::grid_points(command, &config.grid)?;
    let settings = RunSettings {
        seed: config.seed,
        reps,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows = pool.install(|| {
        points
            .par_iter()
            .map(|p| commands::run_point(command, p, settings))
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by(ResultRow::cmp_params);
    Ok(RunOutput {
        command,
        rows,
        header,
    })
}

/// Runs a config and writes its output; returns the exit code.
pub fn execute(config: &ExperimentConfig) -> Result<i32, CliError> {
    let result = run(config)?;
    let text = result.render(config.format.unwrap_or_default());
    match &config.output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    Ok(result.exit_code())
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match args.into_config().and_then(|c| execute(&c)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("workbench: {e}");
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn bounds_grid_has_eight_rows() {
        let c = config(
            r#"{"command": "bounds", "grid": {"n": [100, 1000], "gamma": ["1/n", "1/sqrt(n)"], "delta": [0.1, 0.01]}}"#,
        );
        let out = run(&c).unwrap();
        assert_eq!(out.rows.len(), 8);
        assert!(out.rows.iter().all(|r| r.values.len() == 5));
        assert_eq!(out.exit_code(), EXIT_PASS);
        let csv = out.render(Format::Csv);
        assert_eq!(csv.lines().count(), 9);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn chaos_row_matches_certificate() {
        let c =
            config(r#"{"command": "chaos", "grid": {"n": [4], "m": [0], "beta": [2], "p": [2]}}"#);
        let out = run(&c).unwrap();
        let row = &out.rows[0];
        assert_eq!(row.value("pz_lhs"), Some(&Cell::Float(0.5)));
        match row.value("norm_p") {
            Some(Cell::Float(v)) => assert!((v - 24f64.sqrt()).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(out.passed());
    }

    #[test]
    fn configuration_errors() {
        let empty =
            config(r#"{"command": "bounds", "grid": {"n": [], "gamma": [0.1], "delta": [0.1]}}"#);
        assert!(matches!(run(&empty), Err(CliError::Config(_))));
        let unseeded = config(
            r#"{"command": "tails", "grid": {"learner": ["constant"], "n": [10], "delta": [0.1]}}"#,
        );
        assert!(matches!(run(&unseeded), Err(CliError::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"command": "fit"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command": "bounds", "colour": 1}"#).is_err());
        let degenerate =
            config(r#"{"command": "chaos", "grid": {"n": [4], "m": [0], "beta": [0], "p": [2]}}"#);
        assert!(run(&degenerate).is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"command": "chaos", "seed": 1, "reps": 5, "grid": {"n": [4]}}"#,
        )
        .unwrap();
        let args = Args::try_parse_from([
            "workbench",
            "bounds",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "--grid",
            "n=10,20",
            "--threads",
            "2",
        ])
        .unwrap();
        let c = args.into_config().unwrap();
        assert_eq!(c.command, Some(Command::Bounds));
        assert_eq!((c.seed, c.reps, c.threads), (Some(9), Some(5), Some(2)));
        assert_eq!(
            c.grid["n"],
            vec![GridValue::Num(10.0), GridValue::Num(20.0)]
        );
    }
}
