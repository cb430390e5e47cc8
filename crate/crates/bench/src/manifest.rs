//! Run manifest written beside every batch output.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::scenario::{DegenerateRecord, FailureRecord, RunCounts, ScenarioReport};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Fully resolved configuration; feeding this file back as `--config`
    /// reproduces the run.
    pub config: ScenarioConfig,
    pub base_seed: u64,
    /// Realization `r` uses seed `base_seed + r`.
    pub seed_rule: &'static str,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub counts: Option<RunCounts>,
    pub failures: Vec<FailureRecord>,
    pub degenerate_likelihood: Vec<DegenerateRecord>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ScenarioConfig, threads: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            base_seed: config.run.base_seed,
            seed_rule: "base_seed + realization",
            threads,
            wall_clock_seconds: 0.0,
            counts: None,
            failures: Vec::new(),
            degenerate_likelihood: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, report: &ScenarioReport) {
        self.counts = Some(report.counts);
        self.failures = report.failures.clone();
        self.degenerate_likelihood = report.realizations.iter().flat_map(|r| r.degenerate.iter().cloned()).collect();
    }
}
