//! `el`: run epidemic-learning experiments and verification suites from
//! TOML config files.
//!
//! Exit codes: 0 on success, 1 on a runtime error or a failed check, 2 on a
//! config error.

mod commands;
mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_compare, cmd_indegree, cmd_partition_stats, cmd_run, cmd_verify_mixing, IndegreeReport, PartitionReport,
    RunReport, VerifyReport, VerifyRow,
};
pub use files::write_atomic;

/// Failure of a subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad or unreadable config, bad flags, unwritable output directory.
    Config(String),
    /// Error while the experiment ran.
    Runtime(String),
    /// Finished, but at least one check failed.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (run and compare default to `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the seed of the config file.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides the Monte Carlo trial count.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
    /// Only errors and warnings on the terminal.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run one experiment; writes metrics.csv, metrics.jsonl and manifest.json.
    Run,
    /// Run the same experiment over several topologies and line them up.
    Compare {
        /// Target for the rounds-to-threshold column (on loss_at_avg - F*).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Monte Carlo check of the contraction, average and variance properties.
    VerifyMixing,
    /// Indegree distribution under push sampling.
    Indegree {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Per-node class make-up of a Dirichlet partition.
    PartitionStats,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "el", version, about = "Epidemic learning simulator and verification suites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let common = &cli.common;
    let result = match &cli.command {
        Command::Run => cmd_run(common).map(|r| {
            if !common.quiet {
                println!("{}", r.describe());
            }
        }),
        Command::Compare { threshold } => cmd_compare(common, *threshold).map(|c| {
            if !common.quiet {
                print!("{}", c.summary_table());
            }
        }),
        Command::VerifyMixing => cmd_verify_mixing(common).and_then(|r| {
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            if !common.quiet {
                print!("{}", r.table());
            }
            if r.passed() {
                Ok(())
            } else {
                Err(CliError::Failed(format!("verify-mixing: {} of {} checks failed", r.failures(), r.rows.len())))
            }
        }),
        Command::Indegree { n, s, rounds } => cmd_indegree(common, *n, *s, *rounds).map(|r| {
            if !common.quiet {
                println!("{}", r.describe());
            }
        }),
        Command::PartitionStats => cmd_partition_stats(common).map(|r| {
            if !common.quiet {
                print!("{}", r.table());
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
