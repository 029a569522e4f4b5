use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rapsa_cli::{
    bound_reports, build_problem, compare_runs, reports_text, run_experiment, ExperimentConfig,
    RunOptions,
};
use rapsa_core::data::read_trace_csv;

#[derive(Parser)]
#[command(
    name = "rapsa",
    version,
    about = "Random parallel stochastic (quasi-Newton) experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (block count, seed) cell of an experiment config.
    Run {
        config: PathBuf,
        /// Replace the config's seed list (comma separated).
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Worker threads for the sweep (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Directory holding the MNIST IDX files.
        #[arg(long, env = "RAPSA_MNIST_DIR")]
        mnist_dir: Option<PathBuf>,
    },
    /// Compare two trace CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Objective-gap threshold for the time-to-accuracy metrics.
        #[arg(long)]
        eps: f64,
    },
    /// Print constants and bounds for a config without running it.
    Bounds {
        config: PathBuf,
        #[arg(long, env = "RAPSA_MNIST_DIR")]
        mnist_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            threads,
            out_dir,
            mnist_dir,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(
                &cfg,
                &RunOptions {
                    out_dir,
                    seeds: seed_override,
                    threads,
                    mnist_dir,
                },
            )?;
            println!(
                "wrote {} cells to {}",
                summary.cells.len(),
                summary.out_dir.display()
            );
            println!("gap threshold {:e}", summary.threshold);
            for b in &summary.per_block {
                let reached = b
                    .iterations_to_threshold
                    .map_or_else(|| "not reached".to_string(), |t| format!("t = {t}"));
                let acc = b
                    .test_accuracy
                    .map_or_else(String::new, |a| format!(", test accuracy {a:.4}"));
                println!(
                    "B = {:>4}: final gap {:.4e}, threshold {reached}{acc}",
                    b.blocks, b.final_gap
                );
            }
        }
        Command::Compare { a, b, eps } => {
            let ta = read_trace_csv(&a).with_context(|| format!("reading {}", a.display()))?;
            let tb = read_trace_csv(&b).with_context(|| format!("reading {}", b.display()))?;
            print!("{}", compare_runs(&ta, &tb, eps)?.to_text());
        }
        Command::Bounds { config, mnist_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg.problem, mnist_dir.as_deref())?;
            print!(
                "{}",
                reports_text(&cfg, &built, &bound_reports(&cfg, &built)?)
            );
        }
    }
    Ok(())
}
