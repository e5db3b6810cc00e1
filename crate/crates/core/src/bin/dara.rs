use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use dara::experiment::{self, Axis, ExperimentConfig};
use dara::policies::optimal_exhaustive;
use dara::weights::{fit_exponential, profile_from_histogram, DeadlineHistogram};
use dara::{Allocation, Error, Objective, Policy, Result};

#[derive(Parser)]
#[command(name = "dara", version, about = "Delay-aware TDMA slot allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate one block and print allocations and reports as JSON.
    Allocate {
        #[arg(short, long)]
        config: PathBuf,
        /// Run only this policy instead of the configured list.
        #[arg(short, long)]
        policy: Option<String>,
    },
    /// Sweep one parameter and write per-sensor results as CSV.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// `N=2,3,4`, `delta=0.99,0.995` or `T=100,500`.
        #[arg(short, long)]
        axis: String,
        #[arg(short, long, default_value_t = 1)]
        repetitions: u64,
        /// Output file for the rows; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write per-cell mean/min objective here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Add a per-policy max-normalized column to the summary.
        #[arg(long)]
        normalize: bool,
    },
    /// Exhaustively search a small block for the optimal allocation.
    Oracle {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Fit a geometric discount factor to a `slot,bytes` deadline histogram.
    Fit {
        #[arg(long)]
        histogram: PathBuf,
    },
}

#[derive(Serialize)]
struct OracleOutput {
    objective: Objective,
    allocation: Allocation,
    value: f64,
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(rename = "T")]
    slots: usize,
    delta_hat: f64,
    weights: Vec<f64>,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Allocate { config, policy } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(policy) = policy {
                config.policies = vec![policy.parse::<Policy>()?];
            }
            print_json(&experiment::allocate(&config)?)
        }
        Command::Sweep {
            config,
            axis,
            repetitions,
            out,
            summary,
            normalize,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let axis: Axis = axis.parse()?;
            let mut result = experiment::sweep(&config, &axis, repetitions)?;
            if normalize {
                result.normalize_per_policy();
            }
            match out {
                Some(path) => experiment::write_rows_csv(&result.rows, create(&path)?)?,
                None => experiment::write_rows_csv(&result.rows, io::stdout().lock())?,
            }
            if let Some(path) = summary {
                experiment::write_summary_csv(&result.summary, create(&path)?)?;
            }
            Ok(())
        }
        Command::Oracle { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let rab = experiment::build_rab(&config)?;
            let (allocation, value) = optimal_exhaustive(&rab, config.objective)?;
            print_json(&OracleOutput {
                objective: config.objective,
                allocation,
                value,
            })
        }
        Command::Fit { histogram } => {
            let hist = DeadlineHistogram::from_csv_path(&histogram)?;
            let profile = profile_from_histogram(&hist)?;
            let delta_hat = fit_exponential(&profile)?;
            print_json(&FitOutput {
                slots: profile.len(),
                delta_hat,
                weights: profile.weights().to_vec(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
