// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod suite;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Config, ConfigError};
use tasks::{RunError, Task};

/// Hyperbolic fillings, weak capacity and level modulus experiments.
#[derive(Parser, Debug)]
#[command(name = "hyperfill", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config, or a `manifest.json` from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build a model space and export its sample.
    Space,
    /// Build and export a hyperbolic filling.
    Fill,
    /// Weak capacity bounds for ball pairs.
    Cap,
    /// Level p-modulus for ball pairs.
    Mod,
    /// Control-function curve.
    Phi,
    /// Exponent sweep across depths.
    Sweep,
    /// Property checks of every module.
    Suite,
}

fn task(c: Command) -> Task {
    match c {
        Command::Space => Task::Space,
        Command::Fill => Task::Fill,
        Command::Cap => Task::Cap,
        Command::Mod => Task::Mod,
        Command::Phi => Task::Phi,
        Command::Sweep => Task::Sweep,
        Command::Suite => Task::Suite,
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, RunError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(ConfigError::new("--jobs", "must be positive").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", json!(s));
    }
    let dir: String = cfg.peek("output.dir")?.unwrap_or_else(|| "out".to_string());
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(dir));
    tasks::run(task(cli.command), &cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
