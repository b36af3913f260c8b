//! `fecf`: free-energy counterfactual explanations from the command line.
//!
//! Exit codes: 0 success, 1 usage/config/runtime error (no outputs written),
//! 2 `explain` did not converge, 3 `explain` converged but failed the
//! robustness probe. Errors go to stderr as `ERROR <code>: <message>`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "fecf", version, about = "Free-energy counterfactual explanations")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, env = "FECF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Find one counterfactual and write result.json and trace.csv.
    Explain,
    /// Export the free-energy surface over a 2-D box.
    Landscape,
    /// Stability scores over a (lambda, mu, beta) grid.
    Sweep,
    /// Per-feature variability of the three methods plus a decision-boundary grid.
    Compare,
    /// Timing benchmark with fitted log-log slopes.
    Bench,
    /// Write a synthetic IoT dataset.
    GenData,
}

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: "config",
            message: message.into(),
        }
    }
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: "io",
            message: message.into(),
        }
    }
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: "input",
            message: message.into(),
        }
    }
    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: "numerical",
            message: message.into(),
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    if out.is_file() {
        return Err(CliError::config(format!("output path {} is a file", out.display())));
    }
    match cli.command {
        Command::Explain => commands::explain(&cfg, &out),
        Command::Landscape => commands::landscape(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Compare => commands::compare(&cfg, &out),
        Command::Bench => commands::bench(&cfg, &out),
        Command::GenData => commands::gen_data(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("ERROR usage: {}", e.to_string().trim_end());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}
