//! `curricula` command-line frontend.
//!
//! Exit codes: 0 success, 1 a checked claim failed, 2 usage, input or I/O
//! error.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "curricula", version, about = "Transfer studies over factorial game-variant designs")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Table format for written outputs.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate score tables or transfer grids and write them canonically.
    Ingest(IngestArgs),
    /// Type-3 ANOVA with Bonferroni post-hoc tests.
    Anova(AnovaArgs),
    /// Build raw and normalized transfer matrices and a heatmap.
    Transfer(TransferArgs),
    /// Evaluate source-selection strategies on a normalized matrix.
    Strategies(StrategiesArgs),
    /// Run the MiniFreeway transfer experiment end to end.
    RunMini(RunMiniArgs),
    /// Recompute the bundled published tables and summarise them.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Game title whose design validates the variants.
    #[arg(long)]
    pub title: String,
    /// Score kind: expert, scratch, zero_shot_from(X_YZ), finetuned_from(X_YZ).
    #[arg(long, default_value = "expert")]
    pub kind: String,
    /// Bundled table stem (expert, scratch, transfer_raw, ...); repeatable.
    #[arg(long)]
    pub bundled: Vec<String>,
    /// Score-table or grid CSV files.
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnovaArgs {
    /// Score table CSV (`variant,score[,score...]`).
    pub scores: PathBuf,
    /// Game title (SpaceInvaders, Breakout, Freeway, MiniFreeway).
    #[arg(long, default_value = "MiniFreeway")]
    pub title: String,
    /// Classical covariance instead of HC3.
    #[arg(long)]
    pub classical: bool,
    /// Family-wise significance level before correction.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Expert table; scores are analysed as 100 * score / expert mean.
    #[arg(long)]
    pub normalize_by: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Game title.
    #[arg(long)]
    pub title: String,
    /// Expert score table (normalization denominators).
    #[arg(long, required_unless_present = "bundled")]
    pub expert: Option<PathBuf>,
    /// Zero-shot evaluations of one source: `SRC=FILE`; repeatable.
    #[arg(long = "eval", value_name = "SRC=FILE")]
    pub evals: Vec<String>,
    /// Raw targets x sources grid instead of per-source files.
    #[arg(long)]
    pub raw_matrix: Option<PathBuf>,
    /// Use the title's bundled expert table and raw matrix.
    #[arg(long)]
    pub bundled: bool,
}

#[derive(Debug, Args)]
pub struct StrategiesArgs {
    /// Normalized targets x sources grid.
    #[arg(long, required_unless_present = "bundled")]
    pub matrix: Option<PathBuf>,
    /// Game title.
    #[arg(long)]
    pub title: String,
    /// Use the title's bundled normalized matrix.
    #[arg(long)]
    pub bundled: bool,
    /// Report the top3 check without failing on it.
    #[arg(long)]
    pub no_assert: bool,
}

#[derive(Debug, Args)]
pub struct RunMiniArgs {
    /// Environment steps per expert run.
    #[arg(long)]
    pub expert_budget: Option<u64>,
    /// Environment steps per finetune and scratch run.
    #[arg(long)]
    pub finetune_budget: Option<u64>,
    /// Experts kept per variant (ANOVA observations per cell).
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Expert runs per variant before selection; defaults to `--seeds`.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Finetune and scratch runs per variant; defaults to `--seeds`.
    #[arg(long)]
    pub finetune_seeds: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Significance level for the run's ANOVA tables.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Titles to report; all bundled titles by default.
    #[arg(long)]
    pub title: Vec<String>,
    /// Also summarise a finished `run-mini` output directory.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Normalization tolerance in percentage points.
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    /// Exit 1 when a recomputed cell exceeds the tolerance.
    #[arg(long)]
    pub strict: bool,
}

/// Parses arguments, runs the command, prints errors and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
