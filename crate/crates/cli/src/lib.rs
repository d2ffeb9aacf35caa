//! Command-line driver: analysis of a configured system, parameter sweeps,
//! readout and strength optimization, cross-route verification and the
//! two cooling-figure data sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::{Format, Report};

#[derive(Debug, Parser)]
#[command(name = "qfc", version, about = "Optimal feedback cooling of a measured oscillator")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "QFC_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    Left,
    Right,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional and controlled states, optimal controller and figures of merit.
    Analyze,
    /// Evaluate the metrics over the [sweep] grid.
    Sweep,
    /// Best cold-damping strength, or best readout for a classical noise budget.
    Optimize,
    /// Cross-check all routes on the fixture set.
    Verify {
        #[arg(value_enum, default_value_t = Depth::Fast)]
        depth: Depth,
    },
    /// Occupation curves versus strength (left) or classical noise (right).
    Fig2 {
        #[arg(value_enum)]
        panel: Panel,
        #[arg(long)]
        points: Option<usize>,
    },
}

pub fn load_config(path: Option<&PathBuf>) -> Result<LoadedConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            LoadedConfig::parse(&text)
        }
        None => Ok(LoadedConfig::empty()),
    }
}

fn build_report(cli: &Cli, cfg: &LoadedConfig) -> Result<Report, CliError> {
    use commands::*;
    match &cli.command {
        Command::Analyze => run_analyze(cfg, cli.seed),
        Command::Sweep => run_sweep(cfg, cli.seed),
        Command::Optimize => run_optimize(cfg, cli.seed),
        Command::Fig2 { panel, points } => match panel {
            Panel::Left => run_fig2_left(cfg, cli.seed, points.unwrap_or(201)),
            Panel::Right => run_fig2_right(cfg, cli.seed, points.unwrap_or(16)),
        },
        Command::Verify { depth } => {
            let (report, failed) = verify::run_verify(cfg, cli.seed, *depth == Depth::Full)?;
            if failed.is_empty() {
                return Ok(report);
            }
            emit(cli, &report)?;
            let names: Vec<String> = failed.iter().map(|c| format!("{}: {}", c.fixture, c.name)).collect();
            Err(CliError::Verification(names.join("; ")))
        }
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    let text = report.render(cli.format);
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(cli.config.as_ref())?;
    let report = build_report(cli, &cfg)?;
    emit(cli, &report)
}
