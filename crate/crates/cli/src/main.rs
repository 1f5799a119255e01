use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use spillover_cli::{run_pipeline, run_preset, RunConfig, RunOutcome};

/// Estimate commodity-channel spillovers and write tables, diagnostics and
/// impulse responses.
#[derive(Debug, Parser)]
#[command(name = "spillover", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for bootstrap draws and, with --preset, the simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the synthetic pipeline on a named data-generating preset.
    #[arg(long)]
    preset: Option<String>,
    /// Skip SVG charts.
    #[arg(long)]
    no_plots: bool,
}

fn run(args: Args) -> Result<RunOutcome> {
    let mut cfg = match &args.config {
        Some(path) => Some(RunConfig::load(path)?),
        None => None,
    };
    if let Some(c) = cfg.as_mut() {
        if let Some(out) = &args.out {
            c.output = out.clone();
        }
        if let Some(seed) = args.seed {
            c.bootstrap.seed = seed;
        }
        if args.no_plots {
            c.plots = false;
        }
    }
    match (&args.preset, cfg) {
        (Some(name), cfg) => {
            let mut base = cfg.unwrap_or_else(|| RunConfig::synthetic(1));
            if let Some(out) = &args.out {
                base.output = out.clone();
            }
            base.plots &= !args.no_plots;
            let seed = args.seed.unwrap_or(base.bootstrap.seed);
            run_preset(name, seed, Some(&base))
        }
        (None, Some(cfg)) => run_pipeline(&cfg),
        (None, None) => bail!("either --config or --preset is required"),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(outcome) => {
            for c in &outcome.manifest.combinations {
                match &c.error {
                    None => println!("ok      r={} p={}", c.r, c.p),
                    Some(e) => println!("failed  r={} p={}: {e}", c.r, c.p),
                }
            }
            println!("{} files written", outcome.manifest.files.len());
            if outcome.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
