//! Command-line runner for the simulator: single scenarios, named presets
//! and parameter sweeps.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mltcp_sim::metrics;
use mltcp_sim::scenario::{preset, presets, PresetKind, Scenario};
use mltcp_sim::sim;
use mltcp_sim::sweep::{self, SweepError};

#[derive(Parser)]
#[command(name = "mltcp-sim", version, about = "Packet-level simulator for periodic DNN training traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or preset and write its CSV report.
    Run {
        /// Scenario file path or preset name.
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a sweep file or a preset's sweep.
    Sweep {
        /// Sweep file path or preset name.
        sweep: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Grid runs executed at the same time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Inspect the bundled presets.
    Preset {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    /// List preset names with a one-line description.
    List,
}

/// Failure classes with their exit codes.
enum Failure {
    /// Unreadable or invalid input, or a sweep over its run cap.
    Input(anyhow::Error),
    /// The simulation itself failed.
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn load_scenario(target: &str) -> Result<Scenario> {
    let text = match preset(target) {
        Some(p) => p.text(PresetKind::Scenario).expect("every preset has a scenario").to_string(),
        None => std::fs::read_to_string(target).with_context(|| format!("cannot read `{target}`"))?,
    };
    Scenario::parse(&text).with_context(|| target.to_string())
}

fn run(target: &str, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut scenario = load_scenario(target).map_err(Failure::Input)?;
    if let Some(seed) = seed {
        scenario.spec.seed = seed;
    }
    let report = panic::catch_unwind(AssertUnwindSafe(|| sim::run(&scenario)))
        .map_err(|e| Failure::Runtime(anyhow::anyhow!("simulation failed: {}", panic_message(&e))))?;
    metrics::write_report(&report, out).map_err(|e| Failure::Runtime(e.into()))?;
    for s in metrics::summarize(&report) {
        let score = s.interleaving_score.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} mean {:>10.3} ms  p99 {:>10.3} ms  score {score}",
            s.job,
            s.mean_ns as f64 / 1e6,
            s.p99_ns as f64 / 1e6
        );
    }
    if report.truncated {
        eprintln!("warning: the run hit its time cap before every job finished");
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn run_sweep(target: &str, out: &Path, jobs: usize) -> Result<(), Failure> {
    let plan = sweep::load(target).map_err(|e| match e {
        SweepError::Io(_) | SweepError::Csv(_) | SweepError::Report(_) => Failure::Runtime(e.into()),
        other => Failure::Input(anyhow::Error::new(other).context(target.to_string())),
    })?;
    eprintln!(
        "{} grid points, {} runs, {} baseline runs, {} at a time",
        plan.points(),
        plan.runs.len(),
        plan.baselines.len(),
        jobs.max(1)
    );
    let results = plan.execute(jobs);
    results.write(out).map_err(|e| Failure::Runtime(e.into()))?;
    let rows = results.summary();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows written to {}", rows.len(), out.join(sweep::SUMMARY_FILE).display());
    if failed > 0 {
        eprintln!("warning: {failed} grid points had failed runs; see the status column");
    }
    Ok(())
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| e.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    panic::set_hook(Box::new(|_| {}));
    let result = match cli.command {
        Command::Run { scenario, out, seed } => run(&scenario, &out, seed),
        Command::Sweep { sweep, out, jobs } => run_sweep(&sweep, &out, jobs),
        Command::Preset { command: PresetCommand::List } => {
            for p in presets() {
                let sweep = if p.sweep.is_some() { " (sweep)" } else { "" };
                println!("{:<22} {}{sweep}", p.name, p.description());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
