use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hydrapf_bench::output::write_json;
use hydrapf_bench::scenario::{write_comparison, ComparisonRow};
use hydrapf_bench::{compare_models, load_config, run_scenario, simulate_plants, RunManifest, ScenarioConfig};

/// Servo-hydraulic state estimation experiments.
#[derive(Parser)]
#[command(name = "hydrapf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured input through the actual, nonlinear-nominal and linear-nominal plants.
    Simulate(Common),
    /// Score both nominal models against the actual plant over a set of sinusoids.
    CompareModels(Common),
    /// Run the estimators on a single noise level.
    Estimate(Common),
    /// Run the estimators over every configured noise level and particle count.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.base_seed = seed;
        }
        Ok(cfg)
    }

    fn init_threads(&self) -> Result<usize> {
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be >= 1");
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
        Ok(rayon::current_num_threads())
    }
}

fn finish(mut manifest: RunManifest, out: &Path, started: Instant, outputs: Vec<String>) -> Result<()> {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.outputs = outputs;
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let started = Instant::now();
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::CompareModels(c) => ("compare-models", c),
        Command::Estimate(c) => ("estimate", c),
        Command::Sweep(c) => ("sweep", c),
    };
    let cfg = common.resolve()?;
    let threads = common.init_threads()?;
    let out = &common.out;
    let mut manifest = RunManifest::new(name, &cfg, threads);

    match &cli.command {
        Command::Simulate(_) => {
            let n = simulate_plants(&cfg, &out.join("simulation.csv"))?;
            log::info!("wrote {n} samples to {}", out.join("simulation.csv").display());
            finish(manifest, out, started, vec!["simulation.csv".into()])
        }
        Command::CompareModels(_) => {
            let rows = compare_models(&cfg)?;
            write_comparison(&out.join("compare_models.csv"), &rows)?;
            print_comparison(&rows);
            finish(manifest, out, started, vec!["compare_models.csv".into()])
        }
        Command::Estimate(_) | Command::Sweep(_) => {
            if matches!(cli.command, Command::Estimate(_)) && cfg.noise.level.len() != 1 {
                bail!("estimate takes exactly one noise.level; use sweep for several");
            }
            let report = run_scenario(&cfg, Some(out))?;
            report.write_summary(&out.join("summary.csv"))?;
            manifest.record(&report);
            log::info!(
                "{} realizations ok, {} failed; summary in {}",
                report.counts.realizations_ok,
                report.counts.realizations_failed,
                out.join("summary.csv").display()
            );
            finish(manifest, out, started, vec!["summary.csv".into()])
        }
    }
}

fn print_comparison(rows: &[ComparisonRow]) {
    println!("{:>8}  {:<18} {:<6} {:>9}", "f (Hz)", "model", "qty", "NRMSE %");
    for r in rows {
        println!("{:>8}  {:<18} {:<6} {:>9.2}", r.frequency_hz, r.model, r.quantity, r.nrmse);
    }
}
