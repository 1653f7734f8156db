use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use gradflow_experiments::{run, Command, ExperimentError, ExperimentSpec, RunOptions};

const EXIT_VIOLATION: u8 = 4;

/// Deep GCN gradient-similarity experiments.
#[derive(Debug, Parser)]
#[command(name = "gradflow", version)]
struct Cli {
    /// grad-profile, depth-sweep, train-curves, scatter, bound-check or oracle-test
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Parallel grid cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Allow depths above 128.
    #[arg(long)]
    heavy: bool,
    /// Skip the node/edge/class count check for known datasets.
    #[arg(long)]
    no_validate: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<ExperimentError>())
                .map_or(1, ExperimentError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    let spec = ExperimentSpec::from_file(&cli.config, cli.command, cli.heavy)
        .with_context(|| format!("loading {}", cli.config.display()))?;
    let opts = RunOptions {
        jobs: cli.jobs.max(1),
        validate_dataset: !cli.no_validate,
    };
    let report = run(&spec, opts).with_context(|| format!("running {}", cli.command))?;
    for line in &report.lines {
        println!("{line}");
    }
    println!("artifacts: {}", report.command_dir.display());
    if report.violations > 0 {
        eprintln!("{} violation(s)", report.violations);
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(ExitCode::SUCCESS)
}
