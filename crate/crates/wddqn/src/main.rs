use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use wddqn::harness::{self, load_config};

#[derive(Parser)]
#[command(
    name = "wddqn",
    about = "Multiagent RL lab: weighted double deep Q-networks with a lenient \
             reward network and scheduled replay, plus baselines, on two \
             cooperative gridworld games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and write episodes.csv / summary.csv / meta.csv.
    Run {
        /// Flat `key = value` experiment config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several seeds of one config (in parallel), one subdirectory each.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seed list, e.g. `--seeds 0,1,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge run directories into one plot-ready CSV keyed by
    /// (agent, seed, window).
    Compare {
        /// Run directories produced by `run` or `sweep`.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant/oracle battery and report one line per check.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config)?;
            let result = harness::run(&cfg, seed, Some(&out))?;
            let fw = &result.summary.final_window;
            println!(
                "{} seed {seed}: {} episodes in {:.1?}; final-window mean reward {:.3} (min {:.3}, max {:.3})",
                cfg.agent_kind.as_str(),
                result.records.len(),
                result.summary.wall_clock,
                fw.mean,
                fw.min,
                fw.max
            );
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load_config(&config)?;
            let results: Vec<_> = seeds
                .par_iter()
                .map(|&seed| {
                    let dir = out.join(format!("seed-{seed}"));
                    harness::run(&cfg, seed, Some(&dir)).map(|r| (seed, r))
                })
                .collect();
            let mut failed = false;
            for result in results {
                match result {
                    Ok((seed, r)) => println!(
                        "seed {seed}: final-window mean reward {:.3} ({:.1?})",
                        r.summary.final_window.mean, r.summary.wall_clock
                    ),
                    Err(e) => {
                        eprintln!("error: {e}");
                        failed = true;
                    }
                }
            }
            Ok(if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Compare { inputs, out } => {
            harness::compare(&inputs, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check => {
            let results = harness::run_checks();
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<26} {}  {}",
                    r.name,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.detail
                );
                if !r.pass {
                    failed += 1;
                }
            }
            println!("{} of {} checks passed", results.len() - failed, results.len());
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
