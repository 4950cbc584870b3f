//! `prunecoal`: samplers, chains, verification suites and tables.
//!
//! Exit status is 0 on success, 1 on a usage or argument error and 2 when a
//! verification suite fails.

mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "prunecoal",
    version,
    about = "Pruning of stable Galton-Watson trees and the beta(1+a,1-a)-coalescent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed of every random stream.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for replicate-parallel runs.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a Galton-Watson tree, optionally conditioned on its leaf count.
    SampleTree {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "leaves", visible_alias = "n")]
        leaves: Option<usize>,
        /// Prune the tree at level theta instead (unconditioned only).
        #[arg(long, conflicts_with_all = ["leaves", "kesten_height"])]
        theta: Option<f64>,
        /// Draw the size-biased tree truncated at this height instead.
        #[arg(long, conflicts_with = "leaves")]
        kesten_height: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the pruning chain on a tree with `--leaves` uniformly labeled leaves.
    Prune {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "leaves", visible_alias = "n")]
        leaves: usize,
        /// Print every event instead of the summary statistics.
        #[arg(long)]
        trace: bool,
        /// Cut in increasing order of independent marks instead of running
        /// the jump chain.
        #[arg(long)]
        marks: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the jump chain of the coalescent from `--n` singletons.
    Beta {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "n", visible_alias = "leaves")]
        n: usize,
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite; exits with status 2 if any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Parameter values to check (comma separated); each suite has defaults.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Largest n for the exact suites.
        #[arg(long)]
        nmax: Option<usize>,
        /// Leaf counts for the simulation suites (comma separated).
        #[arg(long = "n", visible_alias = "leaves", value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        reps: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulated distributions of chain statistics.
    Dist {
        #[arg(value_enum)]
        statistic: DistKind,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "n", visible_alias = "leaves")]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long, value_enum, default_value_t = EngineArg::Beta)]
        engine: EngineArg,
        #[command(flatten)]
        common: Common,
    },
    /// Tables of special functions with closed form and numerical columns.
    Specfn {
        #[arg(value_enum)]
        function: SpecKind,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Arguments of the subordinator exponent (comma separated).
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        /// Arguments of the block-count generating function (comma separated).
        #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
        r: Vec<f64>,
        /// Largest moment order.
        #[arg(long, default_value_t = 6)]
        jmax: u32,
        /// Largest block count.
        #[arg(long, default_value_t = 20)]
        mmax: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorem1,
    Rates,
    Pk,
    K0,
    Specfn,
    Bn,
    Zn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Bn,
    Zn,
    FirstEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Prune,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecKind {
    Phi,
    Zmoments,
    Bpmf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run::dispatch(cli.command) {
        Ok(run::Status::Pass) => ExitCode::SUCCESS,
        Ok(run::Status::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
