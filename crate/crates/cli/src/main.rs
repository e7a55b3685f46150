mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Output;
use crate::config::Loaded;

#[derive(Parser)]
#[command(name = "oploc", version, about = "Optimal-path chaos experiments for a monitored qubit")]
struct Cli {
    /// TOML config file; its keys override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `[run] out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `[run] seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "OPLOC_THREADS")]
    threads: Option<usize>,
    /// Built-in parameter set: fig1 … fig9, fig3-paths.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Stroboscopic phase portrait coloured by the Lyapunov exponent.
    Portrait,
    /// Refined Lagrange manifold and catastrophe counts.
    Manifold,
    /// Optimal paths reaching each target angle.
    Multipath,
    /// Stretching parameters and the average Lyapunov exponent.
    Stretch,
    /// Path triplets and their finite-time Lyapunov exponents.
    Le,
    /// Post-selected trajectory density and its ridges.
    SqtDensity,
    /// Most likely intermediate angle in the projective-kick limit.
    Kicklimit,
    /// Manifold deviation from the free rotor, resonances and kick Fourier coefficients.
    Resonance,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Portrait => "portrait",
            Command::Manifold => "manifold",
            Command::Multipath => "multipath",
            Command::Stretch => "stretch",
            Command::Le => "le",
            Command::SqtDensity => "sqt-density",
            Command::Kicklimit => "kicklimit",
            Command::Resonance => "resonance",
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut loaded = Loaded::load(cli.config.as_deref(), cli.preset.as_deref())?;
    let c = &mut loaded.config;
    if let Some(out) = &cli.out {
        c.run.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        c.run.seed = seed;
    }
    c.sqt.seed = c.run.seed;
    if let Some(n) = cli.threads.or(c.run.threads) {
        c.run.threads = Some(n);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let sched = loaded.schedule()?;
    let c = &loaded.config;

    let clock = Instant::now();
    let mut out = Output::new(&c.run.out)?;
    match cli.command {
        Command::Portrait => commands::portrait(c, &sched, &mut out)?,
        Command::Manifold => commands::manifold(c, &sched, &mut out)?,
        Command::Multipath => commands::multipath(c, &sched, &mut out)?,
        Command::Stretch => commands::stretch(c, &sched, &mut out)?,
        Command::Le => commands::le(c, &sched, &mut out)?,
        Command::SqtDensity => commands::sqt_density(c, &sched, &mut out)?,
        Command::Kicklimit => commands::kicklimit(c, &mut out)?,
        Command::Resonance => commands::resonance(c, &sched, &mut out)?,
    }
    let name = cli.command.name();
    let meta = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "preset": cli.preset,
        "threads": rayon::current_num_threads(),
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "files": out.files,
        "counts": out.counts,
        "config": c,
    });
    let path = c.run.out.join(format!("{name}.meta.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
