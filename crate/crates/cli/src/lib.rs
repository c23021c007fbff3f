//! Command-line front end: argument definitions and the five commands.
//!
//! Commands write their report to the `out` writer and warnings to `err`,
//! so they can be driven from tests without spawning a process.

mod commands;
mod format;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use tsfuzz::{ActivityColumn, ClusteringConfig, Dataset, PipelineConfig, SelectionConfig};

pub use format::{sig6, Table};

#[derive(Debug, Parser)]
#[command(name = "tsfuzz", version, about = "Takagi-Sugeno fuzzy regression models from descriptor tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit a model on every row, save it and report the training fit.
    Train(RunArgs),
    /// Leave-one-out cross-validation of the whole identification.
    Crossval(RunArgs),
    /// Rank consequents, eliminate antecedents and refit on the kept columns.
    Select(RunArgs),
    /// Predict every row of a CSV with a saved model.
    Predict(RunArgs),
    /// Write a synthetic benchmark dataset.
    Benchmark(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file to write (train, select) or read (predict).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Activity column name; defaults to the last column.
    #[arg(long)]
    pub activity: Option<String>,
    /// Number of clusters (rules).
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Fuzziness exponent m > 1.
    #[arg(long, default_value_t = 2.0)]
    pub fuzziness: f64,
    /// Convergence threshold on the largest membership change.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Antecedent columns to keep after backward elimination.
    #[arg(long)]
    pub keep_antecedent: Option<usize>,
    /// Best-ranked consequent columns to keep.
    #[arg(long)]
    pub keep_consequent: Option<usize>,
    /// Use weight 1 for every rule.
    #[arg(long)]
    pub unit_weights: bool,
    /// Output file (selection report, predictions or benchmark data).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Observed-vs-predicted CSV for plotting.
    #[arg(long)]
    pub scatter_out: Option<PathBuf>,
    /// two-regime, sigmoid-blend or irrelevant-descriptor.
    #[arg(long, default_value = "two-regime")]
    pub benchmark_kind: String,
    /// Standard deviation of the benchmark's additive noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Benchmark sample count.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

impl Default for RunArgs {
    fn default() -> Self {
        RunArgs::parse_from_defaults()
    }
}

impl RunArgs {
    fn parse_from_defaults() -> Self {
        #[derive(Parser)]
        struct Wrapper {
            #[command(flatten)]
            args: RunArgs,
        }
        Wrapper::parse_from(["tsfuzz"]).args
    }

    pub fn clustering_config(&self) -> ClusteringConfig {
        ClusteringConfig {
            cluster_count: self.clusters,
            fuzziness: self.fuzziness,
            tolerance: self.epsilon,
            max_iterations: self.max_iter,
            seed: self.seed,
            ..ClusteringConfig::default()
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            clustering: self.clustering_config(),
            selection: SelectionConfig {
                keep_antecedent: self.keep_antecedent,
                keep_consequent: self.keep_consequent,
            },
            unit_weights: self.unit_weights,
        }
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
        match path {
            Some(p) if !p.as_os_str().is_empty() => Ok(p),
            _ => bail!("--{flag} is required for this command"),
        }
    }

    fn load_data(&self) -> anyhow::Result<Dataset> {
        let path = self.require(&self.data, "data")?;
        let activity = match &self.activity {
            Some(name) => ActivityColumn::Named(name.clone()),
            None => ActivityColumn::Last,
        };
        tsfuzz::dataio::load_csv(path, &activity)
            .with_context(|| format!("cannot load {}", path.display()))
    }
}

/// Runs one command. Reports go to `out`, warnings to `err`.
pub fn run(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Train(args) => commands::train(args, out, err),
        Command::Crossval(args) => commands::crossval(args, out, err),
        Command::Select(args) => commands::select(args, out, err),
        Command::Predict(args) => commands::predict(args, out),
        Command::Benchmark(args) => commands::benchmark(args, out),
    }
}
