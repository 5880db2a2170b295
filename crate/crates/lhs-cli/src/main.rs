//! Command-line front end: single runs, integration-free gate checks,
//! parameter sweeps, and the reduction/splitting comparisons, each driven by
//! one JSON configuration file.
//!
//! Exit codes: 0 when every verdict is pass or unadjudicated, 1 when any
//! verdict fails, 2 on configuration or runtime errors.

use anyhow::Context;
use clap::{Parser, Subcommand};
use lhs_core::harness::{
    check, compare_reduction, compare_splitting, run, sweep, HarnessError, RunConfig,
    SweepConfig, Verdict,
};
use lhs_core::integrator::IntegrateError;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lhs-lab", version, about = "Delayed aggregation model laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configured run and write its artifacts to a directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate the configured gate on the initial data, no integration.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a cartesian parameter grid and write the sweep table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads for grid points; omit for sequential execution.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Integrate the same real instance through every model reduction.
    CompareReduction {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the zero-delay splitting against the free linear flow.
    CompareSplitting {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A drift abort still leaves the nodes computed so far; write them out so
/// the failure is inspectable.
fn flush_partial(err: &HarnessError, out_dir: &Path) -> anyhow::Result<()> {
    if let HarnessError::Integrate(IntegrateError::Drift { partial, .. }) = err {
        std::fs::create_dir_all(out_dir)?;
        let mut traj = BufWriter::new(File::create(out_dir.join("trajectory.csv"))?);
        partial.write_csv(&mut traj, 1)?;
        traj.flush()?;
        std::fs::write(out_dir.join("report.txt"), format!("error={err}\n"))?;
    }
    Ok(())
}

fn simulate(config_path: &Path, out_dir: &Path) -> anyhow::Result<ExitCode> {
    let config: RunConfig = load(config_path)?;
    match run(&config) {
        Ok(out) => {
            out.write_all(out_dir)?;
            print!("{}", out.report_text());
            Ok(match out.verdict {
                Verdict::Fail => ExitCode::from(1),
                Verdict::Pass | Verdict::Unadjudicated => ExitCode::SUCCESS,
            })
        }
        Err(err) => {
            flush_partial(&err, out_dir)?;
            Err(err.into())
        }
    }
}

fn check_cmd(config_path: &Path) -> anyhow::Result<ExitCode> {
    let config: RunConfig = load(config_path)?;
    let report = check(&config)?;
    print!("{}", report.to_key_values());
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(
    config_path: &Path,
    out_dir: &Path,
    parallel: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let config: SweepConfig = load(config_path)?;
    let table = match parallel {
        Some(threads) => {
            if threads == 0 {
                anyhow::bail!("--parallel needs at least one thread");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .context("building the worker pool")?
                .install(|| sweep(&config, true))?
        }
        None => sweep(&config, false)?,
    };
    std::fs::create_dir_all(out_dir)?;
    let mut csv = BufWriter::new(File::create(out_dir.join("sweep.csv"))?);
    table.write_csv(&mut csv)?;
    csv.flush()?;
    let failed = table
        .rows
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .count();
    let errored = table.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "rows={} failed={} errored={}",
        table.rows.len(),
        failed,
        errored
    );
    Ok(if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn reduction_cmd(config_path: &Path) -> anyhow::Result<ExitCode> {
    let config: RunConfig = load(config_path)?;
    let report = compare_reduction(&config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn splitting_cmd(config_path: &Path) -> anyhow::Result<ExitCode> {
    let config: RunConfig = load(config_path)?;
    let report = compare_splitting(&config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, out_dir } => simulate(config, out_dir),
        Command::Check { config } => check_cmd(config),
        Command::Sweep {
            config,
            out_dir,
            parallel,
        } => sweep_cmd(config, out_dir, *parallel),
        Command::CompareReduction { config } => reduction_cmd(config),
        Command::CompareSplitting { config } => splitting_cmd(config),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
