use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slq_lab::config::ExperimentConfig;
use slq_lab::pool::Workers;
use slq_lab::{output, run_experiment, LabError, Recipe};

#[derive(Debug, Parser)]
#[command(name = "slq-lab", version, about = "Run SLQ queueing experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment; exits 0 on pass, 2 on a failed threshold, 1 on error.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        recipe: Option<Recipe>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
    },
}

fn run(cli: Cli) -> Result<bool, LabError> {
    let Command::Run { config, seed, workers, out, recipe, n } = cli.command;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(r) = recipe {
        cfg.recipe = r;
    }
    if let Some(n) = n {
        cfg.n_list = n;
    }
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    let report = run_experiment(&cfg, &Workers::new(workers)?)?;
    output::emit(&report, &cfg.output_dir)?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {} (threshold {})", c.name, c.value, c.threshold);
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
