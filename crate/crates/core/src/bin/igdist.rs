use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use igdist::harness::{load_config, run, Subcommand};

/// Distances in random intersection graphs: simulation and approximation.
#[derive(Parser)]
#[command(name = "igdist", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding `workers` in the configuration.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("igdist: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = cli.out {
        cfg.output_dir = dir;
    }
    match cli.workers {
        Some(0) => {
            eprintln!("igdist: --workers must be at least 1");
            return ExitCode::from(2);
        }
        Some(w) => cfg.workers = w,
        None => {}
    }
    match run(cli.subcommand, &cfg) {
        Ok(m) => {
            for f in &m.files {
                println!("{}", cfg.output_dir.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("igdist: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
