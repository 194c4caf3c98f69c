//! `delta-uq`: run configured experiments and inspect their reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use delta_uq::experiment::{assemble, timed_seed, ExperimentConfig, ExperimentReport};
use rayon::prelude::*;

/// Environment variable consulted for the output directory when `--out` is absent.
const OUT_ENV: &str = "DELTA_UQ_OUT";

#[derive(Parser)]
#[command(name = "delta-uq", version, about = "Anchored uncertainty experiments")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment and write report.json plus plot data.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `output` field.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Seeds to run concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        parallel: u16,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Pretty-print the report stored in a run directory.
    Report { dir: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()
        .with_context(|| format!("invalid configuration {}", path.display()))?;
    Ok(cfg)
}

fn run(config: &Path, out: Option<PathBuf>, parallel: usize, quiet: bool) -> Result<ExitCode> {
    let cfg = load(config)?;
    for w in delta_uq::experiment::warnings(&cfg) {
        log::warn!("{w}");
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(cfg.experiment.name()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .context("failed to start worker threads")?;
    let start = Instant::now();
    let runs = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                log::info!("{} seed {seed} started", cfg.experiment.name());
                timed_seed(&cfg, seed)
            })
            .collect()
    });
    let output = assemble(&cfg, runs, start.elapsed().as_secs_f64())?;
    let written = output.write(&dir)?;
    if !quiet {
        print!("{}", output.report.render());
        println!("wrote {} files to {}", written.len(), dir.display());
    }
    let failed = output.report.failed_seeds();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: seeds {failed:?} failed; see {}", dir.join("report.json").display());
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run { config, out, parallel } => run(&config, out, usize::from(parallel), cli.quiet),
        Command::Validate { config } => load(&config).map(|cfg| {
            if !cli.quiet {
                println!("{}: valid {} config, {} seeds", config.display(), cfg.experiment.name(), cfg.seeds.len());
            }
            ExitCode::SUCCESS
        }),
        Command::Report { dir } => ExperimentReport::load(&dir).map_err(Into::into).map(|r| {
            print!("{}", r.render());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
