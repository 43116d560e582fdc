use std::process::ExitCode;

use clap::Parser;
use el_cli::{execute, Cli};

fn main() -> ExitCode {
    if let Some(threads) = std::env::var("EL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    ExitCode::from(execute(Cli::parse()))
}
