//! Thin command-line front end over the library: `run` executes one batch,
//! `sweep` compares policies on shared seeds, `report` rebuilds summaries
//! from previously written CSV logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wcsim::config::Algo;
use wcsim::harness::{self, Scenario};
use wcsim::{Result, SimError};

#[derive(Parser)]
#[command(name = "wcsim", about = "Wireless control co-simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded runs.
    #[arg(long)]
    runs: Option<u32>,
    /// Output directory for CSV, SVG, and summary files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy on a scenario.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Policy: hc, pn, or fixed:<k>.
        #[arg(long)]
        algo: Option<String>,
    },
    /// Run several policies on the same seeds.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated policies, e.g. "hc,pn,fixed:2,fixed:4".
        #[arg(long, default_value = "hc,pn,fixed:2,fixed:4")]
        algos: String,
    },
    /// Rebuild summary.toml files from the CSVs under --out.
    Report {
        /// Scenario file the runs were produced from.
        #[arg(long)]
        config: PathBuf,
        /// Directory holding one subdirectory per policy.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn print_batch(summary: &harness::BatchSummary) {
    println!(
        "[{}] {} runs, {} unstable, {} failed",
        summary.algo, summary.runs, summary.unstable_runs, summary.failed_runs
    );
    for agg in &summary.aggregate {
        println!(
            "  loop {}: mae {:.6} | mean tx count {:.3} | mean attempts {:.3}",
            agg.loop_id, agg.mae_mean, agg.mean_eta, agg.mean_actual_tx
        );
    }
    println!("  system lifetime: {:.1} days", summary.system_lifetime_days_mean);
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, algo } => {
            let scenario = Scenario::from_path(&common.config)?;
            let algo = match algo {
                Some(s) => Algo::parse(&s)?,
                None => scenario.spec.algo(),
            };
            let seed = common.seed.unwrap_or(scenario.spec.scenario.seed);
            let runs = common.runs.unwrap_or(scenario.spec.scenario.runs);
            let outcome = harness::run_batch(&scenario, algo, seed, runs)?;
            harness::write_batch_artifacts(&scenario, &outcome, &common.out)?;
            print_batch(&outcome.summary);
            println!("artifacts: {}", common.out.join(algo.label()).display());
            Ok(())
        }
        Command::Sweep { common, algos } => {
            let scenario = Scenario::from_path(&common.config)?;
            let algos: Vec<Algo> = algos
                .split(',')
                .map(|s| Algo::parse(s.trim()))
                .collect::<Result<_>>()?;
            if algos.is_empty() {
                return Err(SimError::config("sweep needs at least one policy"));
            }
            let seed = common.seed.unwrap_or(scenario.spec.scenario.seed);
            let runs = common.runs.unwrap_or(scenario.spec.scenario.runs);
            for outcome in harness::sweep(&scenario, &algos, seed, runs)? {
                harness::write_batch_artifacts(&scenario, &outcome, &common.out)?;
                print_batch(&outcome.summary);
            }
            println!("artifacts: {}", common.out.display());
            Ok(())
        }
        Command::Report { config, out } => {
            let scenario = Scenario::from_path(&config)?;
            let mut found = false;
            let mut dirs: Vec<PathBuf> = std::fs::read_dir(&out)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            for dir in dirs {
                if !dir.join("summary.toml").exists()
                    && !std::fs::read_dir(&dir)?.any(|e| {
                        e.map(|e| e.file_name().to_string_lossy().starts_with("run_"))
                            .unwrap_or(false)
                    })
                {
                    continue;
                }
                let summary = harness::rebuild_summary(&scenario, &dir)?;
                let text = toml::to_string_pretty(&summary)
                    .map_err(|e| SimError::config(format!("summary serialization failed: {e}")))?;
                std::fs::write(dir.join("summary.toml"), text)?;
                print_batch(&summary);
                found = true;
            }
            if !found {
                return Err(SimError::config(format!(
                    "no run directories under {}",
                    out.display()
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
