use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oulab::harness::{
    load_summary, render_summary, run_experiment, run_sweep, write_experiment, ExperimentConfig, HarnessError,
    RunOptions, SweepAxis,
};

#[derive(Parser)]
#[command(name = "oulab", version, about = "Numerical checks for Ornstein-Uhlenbeck semigroups on convex domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output` in the config, then `out/<config name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = number of cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Treat INCONCLUSIVE verdicts as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of an experiment.
    Run(Common),
    /// Run an experiment once per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of epsilon, t, p, dim.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Print a summary.json (or the one inside a directory).
    Report { path: PathBuf },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut config = ExperimentConfig::load(&common.config).map_err(HarnessError::Config)?;
    RunOptions {
        seed: common.seed,
        workers: common.workers,
        strict: common.strict,
    }
    .apply(&mut config);
    let out = common
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| {
            let stem = common.config.file_stem().unwrap_or_default();
            Path::new("out").join(stem)
        });
    Ok((config, out))
}

fn run(common: &Common) -> Result<i32, HarnessError> {
    let (config, out) = load(common)?;
    let experiment = run_experiment(&config, common.strict)?;
    write_experiment(&out, &experiment).map_err(HarnessError::Io)?;
    let summary = load_summary(&out).map_err(HarnessError::Io)?;
    print!("{}", render_summary(&summary));
    println!("results in {}", out.display());
    Ok(experiment.exit_code())
}

fn sweep(common: &Common, axis: &str, values: &[f64]) -> Result<i32, HarnessError> {
    let axis: SweepAxis = axis.parse().map_err(HarnessError::Config)?;
    let (config, out) = load(common)?;
    let outcome = run_sweep(&config, axis, values, &out, common.strict)?;
    for run in &outcome.runs {
        let label = run.value.map(|v| v.to_string()).unwrap_or_else(|| "all".into());
        println!(
            "{axis}={label}: {} checks, {} failing ({})",
            run.experiment.reports.len(),
            run.experiment.failures(),
            run.dir.display()
        );
    }
    println!("trend in {}", out.join(oulab::harness::sweep::TREND_FILE).display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => run(common),
        Command::Sweep { common, axis, values } => sweep(common, axis, values),
        Command::Report { path } => match load_summary(path) {
            Ok(summary) => {
                print!("{}", render_summary(&summary));
                Ok(0)
            }
            Err(e) => Err(HarnessError::Config(e)),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
