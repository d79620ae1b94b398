use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracinv::cli::config::Experiment;
use fracinv::cli::{run, RunOptions};

/// Run one experiment of the fractional diffusion toolkit.
#[derive(Parser, Debug)]
#[command(name = "fracinv", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let options = RunOptions { workers: args.workers, seed: args.seed };
    match run(args.experiment, &args.config, &options) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
            eprintln!("wrote {} files to {}", report.files.len(), report.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
