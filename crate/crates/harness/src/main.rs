use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dcop_harness::config::{ExperimentConfig, Settings, OUT_ENV};
use dcop_harness::report::{feasratio, feasratio_tsv, write_reports, write_stats};
use dcop_harness::runner::{build_optima, run_experiment};
use dcop_harness::store::{write_text, Store};

#[derive(Parser)]
#[command(name = "dcop", version, about = "Dynamic constrained optimization experiments with differential evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Key-value (TOML) config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Compute reference optima for every cell.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Rebuild tables that are already current.
        #[arg(long)]
        force: bool,
    },
    /// Execute the run grid (builds missing optima first).
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Write measure tables, exports and plot data.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Write the pairwise dominance matrix.
    Stats {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo feasible-region shares against their expected values.
    Feasratio {
        #[command(flatten)]
        common: Common,
        /// Uniform samples per instance and time
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn resolve(common: Common) -> anyhow::Result<ExperimentConfig> {
    let file = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    Ok(ExperimentConfig::resolve(file, common.settings, env_out)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Oracle { common, force } => {
            let config = resolve(common)?;
            let built = build_optima(&config, &Store::new(&config.out), force)?;
            println!("{built} optima tables written to {}", config.out.join("optima").display());
        }
        Command::Run { common } => {
            let config = resolve(common)?;
            let started = std::time::Instant::now();
            let summary = run_experiment(&config)?;
            println!(
                "{} runs executed, {} skipped in {:.1}s",
                summary.executed,
                summary.skipped,
                started.elapsed().as_secs_f64()
            );
        }
        Command::Report { common } => {
            let config = resolve(common)?;
            let store = Store::new(&config.out);
            let gaps = write_reports(&config, &store).context("building reports")?;
            println!("reports written to {}", store.reports_dir().display());
            for g in &gaps {
                println!("gap: {g}");
            }
        }
        Command::Stats { common } => {
            let config = resolve(common)?;
            print!("{}", write_stats(&config, &Store::new(&config.out))?);
        }
        Command::Feasratio { common, samples } => {
            let config = resolve(common)?;
            let rows = feasratio(&config, samples)?;
            let text = feasratio_tsv(&rows);
            write_text(&Store::new(&config.out).reports_dir().join("feasratio.tsv"), &text)?;
            print!("{text}");
            if rows.iter().any(|r| !r.pass()) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
