use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedcme::config::{parse_config, parse_sweep};
use fedcme::experiment::{run_experiment, run_sweep};
use fedcme::metrics::compare;

#[derive(Parser)]
#[command(name = "fedcme", version, about = "Federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for local training.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Repeat the run over a seed range, e.g. `seeds=0..4`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Summarise metrics CSV files.
    Compare {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            workers,
            sweep,
        } => parse_config(&config).and_then(|cfg| {
            let summaries = match sweep {
                Some(spec) => run_sweep(&cfg, &parse_sweep(&spec)?, workers)?,
                None => vec![run_experiment(&cfg, workers)?],
            };
            for s in summaries {
                println!("{s}");
            }
            Ok(())
        }),
        Command::Compare { csv } => compare(&csv).map(|table| print!("{table}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
