use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adaptive_nn::bench::report::plot_path;
use adaptive_nn::bench::selftest::run_selftest;
use adaptive_nn::bench::{emit_report, load_config, read_report, run_experiment, summary_table};

#[derive(Parser)]
#[command(
    name = "ann-bench",
    version,
    about = "Adaptive nearest neighbor metric learning benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file and write a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of every experiment.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path (JSON lines); curves go to the same path with a .plot extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of an existing report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run randomized self-consistency checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        cases: usize,
    },
}

fn run(cli: Cli) -> adaptive_nn::Result<bool> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfgs = load_config(&config)?;
            if let Some(s) = seed {
                cfgs.iter_mut().for_each(|c| c.seed = s);
            }
            let mut records = Vec::with_capacity(cfgs.len());
            for cfg in &cfgs {
                eprintln!(
                    "running {} / {} ({} repetitions)",
                    cfg.dataset,
                    cfg.method.name(),
                    cfg.repetitions
                );
                let r = run_experiment(cfg)?;
                eprintln!(
                    "  {:.2} ± {:.2} % in {:.1} s",
                    100.0 * r.mean,
                    100.0 * r.std,
                    r.wall_time_seconds
                );
                records.push(r);
            }
            emit_report(&records, &out)?;
            print!("{}", summary_table(&records));
            eprintln!("wrote {} and {}", out.display(), plot_path(&out).display());
            Ok(true)
        }
        Command::Report { input } => {
            print!("{}", summary_table(&read_report(&input)?));
            Ok(true)
        }
        Command::Selftest { seed, cases } => {
            let outcomes = run_selftest(seed, cases);
            for o in &outcomes {
                println!("{} {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
