//! Scenario orchestration: realization ensembles, estimator runs, scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use hydrapf::kalman::{CovarianceUpdate, GainMode};
use hydrapf::particle::LikelihoodSpec;
use hydrapf::{
    ensemble_stats, interval_nrmse, kf_run, nrmse, pf_run, servo_kalman_model, simulate_linear, sinusoid,
    synthesize_measurements, EnsembleStats, IntervalSpec, KalmanOptions, LinearModel, NoiseLevel, RngStream,
    TimeSeries,
};
use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Estimator, ScenarioConfig};
use crate::output::{num, write_csv, OutputError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("input signal: {0}")]
    Input(#[from] hydrapf::SignalError),
    #[error("plant: {0}")]
    Plant(#[from] hydrapf::PlantError),
    #[error("metrics: {0}")]
    Metrics(#[from] hydrapf::MetricsError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("every realization failed")]
    AllFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Disp,
    Vel,
    Acc,
    Force,
}

impl Quantity {
    pub const MOTION: [Quantity; 3] = [Quantity::Disp, Quantity::Vel, Quantity::Acc];

    pub fn label(self) -> &'static str {
        match self {
            Quantity::Disp => "disp",
            Quantity::Vel => "vel",
            Quantity::Acc => "acc",
            Quantity::Force => "force",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// An estimator run: the Kalman filter, or the particle filter at a given count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EstimatorRun {
    pub estimator: Estimator,
    pub particles: Option<usize>,
}

impl EstimatorRun {
    pub const KF: EstimatorRun = EstimatorRun { estimator: Estimator::Kalman, particles: None };

    pub fn pf(n: usize) -> Self {
        EstimatorRun { estimator: Estimator::Particle, particles: Some(n) }
    }
}

/// Scores of one realization: per-interval NRMSE (%) by estimator and quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationScores {
    pub level: NoiseLevel,
    pub index: usize,
    pub seed: u64,
    pub nrmse: BTreeMap<(EstimatorRun, Quantity), Vec<f64>>,
    pub degenerate: Vec<DegenerateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateRecord {
    pub noise_level: String,
    pub realization: usize,
    pub particles: usize,
    pub steps: Vec<usize>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub noise_level: String,
    pub realization: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    pub plant_simulations: usize,
    pub estimator_runs: usize,
    pub realizations_ok: usize,
    pub realizations_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run: EstimatorRun,
    pub quantity: Quantity,
    pub level: NoiseLevel,
    pub interval: (f64, f64),
    pub stats: EnsembleStats,
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "estimator",
    "quantity",
    "noise_level",
    "particles",
    "interval_start",
    "interval_end",
    "nrmse_mean",
    "nrmse_std",
    "n",
];

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub intervals: IntervalSpec,
    /// Successful realizations ordered by (noise level, index).
    pub realizations: Vec<RealizationScores>,
    pub failures: Vec<FailureRecord>,
    pub counts: RunCounts,
    pub summary: Vec<SummaryRow>,
}

impl ScenarioReport {
    /// Per-realization values of one cell, in realization order.
    pub fn values(&self, level: NoiseLevel, run: EstimatorRun, q: Quantity, interval: usize) -> Vec<f64> {
        self.realizations
            .iter()
            .filter(|r| r.level == level)
            .filter_map(|r| r.nrmse.get(&(run, q)).map(|v| v[interval]))
            .collect()
    }

    pub fn stats(&self, level: NoiseLevel, run: EstimatorRun, q: Quantity, interval: usize) -> Option<EnsembleStats> {
        ensemble_stats(&self.values(level, run, q, interval)).ok()
    }

    pub fn summary_rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.summary.iter().map(|r| {
            vec![
                r.run.estimator.label().to_string(),
                r.quantity.label().to_string(),
                r.level.as_str().to_string(),
                r.run.particles.map(|n| n.to_string()).unwrap_or_default(),
                num(r.interval.0),
                num(r.interval.1),
                num(r.stats.mean),
                num(r.stats.std),
                r.stats.n.to_string(),
            ]
        })
    }

    pub fn write_summary(&self, path: &Path) -> Result<(), OutputError> {
        write_csv(path, &SUMMARY_HEADER, self.summary_rows())
    }
}

/// Evaluation windows: three equal thirds of the record.
pub fn evaluation_intervals(duration: f64) -> IntervalSpec {
    IntervalSpec::new(vec![0.0, duration / 3.0, 2.0 * duration / 3.0, duration]).expect("positive duration")
}

fn level_code(level: NoiseLevel) -> u64 {
    match level {
        NoiseLevel::Off => 0,
        NoiseLevel::L1 => 1,
        NoiseLevel::L2 => 2,
        NoiseLevel::L3 => 3,
    }
}

/// Random streams of one realization. Realization `r` uses seed `base_seed + r`.
#[derive(Debug, Clone, Copy)]
pub struct RealizationStreams {
    pub disp_noise: RngStream,
    pub force_noise: RngStream,
    pub particle: RngStream,
}

impl RealizationStreams {
    pub fn new(seed: u64, level: NoiseLevel) -> Self {
        let base = 16 * level_code(level);
        RealizationStreams {
            disp_noise: RngStream::new(seed, base + 1),
            force_noise: RngStream::new(seed, base + 2),
            particle: RngStream::new(seed, base + 3),
        }
    }
}

struct Job {
    level: NoiseLevel,
    index: usize,
    seed: u64,
}

struct JobOutcome {
    result: Result<RealizationScores, String>,
    plant_simulations: usize,
    estimator_runs: usize,
}

/// Columns of a per-realization time-series file.
struct TimeseriesColumns {
    header: Vec<&'static str>,
    columns: Vec<TimeSeries>,
}

impl TimeseriesColumns {
    fn push(&mut self, name: &'static str, s: TimeSeries) {
        self.header.push(name);
        self.columns.push(s);
    }

    fn write(&self, path: &Path) -> Result<(), OutputError> {
        let t = &self.columns[0];
        let rows = (0..t.len()).map(|i| {
            std::iter::once(num(t.time(i))).chain(self.columns.iter().map(|c| num(c.values()[i]))).collect()
        });
        let mut header = vec!["t"];
        header.extend(&self.header);
        write_csv(path, &header, rows)
    }
}

fn timeseries_path(out: &Path, cfg: &ScenarioConfig, level: NoiseLevel, index: usize) -> std::path::PathBuf {
    let name = format!("timeseries_{index}.csv");
    if cfg.noise.level.len() > 1 {
        out.join(level.as_str()).join(name)
    } else {
        out.join(name)
    }
}

fn run_realization(cfg: &ScenarioConfig, input: &TimeSeries, job: &Job, out: Option<&Path>) -> JobOutcome {
    let mut outcome = JobOutcome { result: Err(String::new()), plant_simulations: 0, estimator_runs: 0 };
    outcome.result = realization_inner(cfg, input, job, out, &mut outcome.plant_simulations, &mut outcome.estimator_runs);
    outcome
}

fn realization_inner(
    cfg: &ScenarioConfig,
    input: &TimeSeries,
    job: &Job,
    out: Option<&Path>,
    plant_sims: &mut usize,
    est_runs: &mut usize,
) -> Result<RealizationScores, String> {
    let intervals = evaluation_intervals(cfg.input.duration);
    let streams = RealizationStreams::new(job.seed, job.level);

    *plant_sims += 1;
    let traj = cfg.actual_plant().simulate(input, cfg.run.substeps).map_err(|e| format!("plant: {e}"))?;
    let meas = synthesize_measurements(&traj, job.level, &streams.disp_noise, &streams.force_noise)
        .map_err(|e| format!("measurements: {e}"))?;
    let truth = [
        (Quantity::Disp, traj.disp()),
        (Quantity::Vel, traj.vel()),
        (Quantity::Acc, traj.acc()),
        (Quantity::Force, traj.force()),
    ];

    let mut scores = BTreeMap::new();
    let mut score = |run: EstimatorRun, q: Quantity, est: &TimeSeries| -> Result<(), String> {
        let truth = &truth.iter().find(|(tq, _)| *tq == q).expect("truth for every quantity").1;
        let v = interval_nrmse(est, truth, &intervals).map_err(|e| format!("{} {q}: {e}", run.estimator.label()))?;
        scores.insert((run, q), v);
        Ok(())
    };

    let write_ts = out.is_some() && cfg.run.timeseries;
    let mut ts = TimeseriesColumns { header: Vec::new(), columns: Vec::new() };
    if write_ts {
        for (name, (_, s)) in ["truth_disp", "truth_vel", "truth_acc", "truth_force"].into_iter().zip(&truth) {
            ts.push(name, s.clone());
        }
        ts.push("meas_disp", meas.disp_noisy.clone());
        ts.push("meas_force", meas.force_noisy.clone());
    }

    if cfg.has(Estimator::Kalman) {
        *est_runs += 1;
        let lm = LinearModel::identified();
        let r = LikelihoodSpec::for_level(job.level).sigma_d.powi(2);
        let model = servo_kalman_model(&lm, input.dt(), r, cfg.kf.q_over_r).map_err(|e| format!("KF model: {e}"))?;
        let options = KalmanOptions {
            covariance: if cfg.kf.joseph { CovarianceUpdate::Joseph } else { CovarianceUpdate::Standard },
            gain: if cfg.kf.steady_state_gain { GainMode::SteadyState } else { GainMode::TimeVarying },
        };
        let kf = kf_run(&model, &lm, input, &meas.disp_noisy, Vector4::zeros(), Matrix4::zeros(), options)
            .map_err(|e| format!("KF: {e}"))?;
        score(EstimatorRun::KF, Quantity::Disp, &kf.disp)?;
        score(EstimatorRun::KF, Quantity::Vel, &kf.vel)?;
        score(EstimatorRun::KF, Quantity::Acc, &kf.acc)?;
        if write_ts {
            ts.push("kf_disp", kf.disp);
            ts.push("kf_vel", kf.vel);
            ts.push("kf_acc", kf.acc);
        }
    }

    let mut degenerate = Vec::new();
    if cfg.has(Estimator::Particle) {
        let counts = cfg.particle_counts();
        for (i, &n) in counts.iter().enumerate() {
            *est_runs += 1;
            let pf_cfg = cfg.pf_config(job.level, n);
            let stream = streams.particle.substream(n as u64);
            let pf = pf_run(&pf_cfg, input, &meas, &stream).map_err(|e| format!("PF@{n}: {e}"))?;
            let run = EstimatorRun::pf(n);
            score(run, Quantity::Disp, &pf.disp)?;
            score(run, Quantity::Vel, &pf.vel)?;
            score(run, Quantity::Acc, &pf.acc)?;
            score(run, Quantity::Force, &pf.force)?;
            if !pf.degenerate_steps.is_empty() {
                degenerate.push(DegenerateRecord {
                    noise_level: job.level.to_string(),
                    realization: job.index,
                    particles: n,
                    steps: pf.degenerate_steps.clone(),
                    flagged: pf.degenerate_flagged,
                });
            }
            if write_ts && i + 1 == counts.len() {
                ts.push("pf_disp", pf.disp);
                ts.push("pf_vel", pf.vel);
                ts.push("pf_acc", pf.acc);
                ts.push("pf_force", pf.force);
            }
        }
    }

    if let (true, Some(dir)) = (write_ts, out) {
        ts.write(&timeseries_path(dir, cfg, job.level, job.index)).map_err(|e| e.to_string())?;
    }

    Ok(RealizationScores { level: job.level, index: job.index, seed: job.seed, nrmse: scores, degenerate })
}

/// Run every (noise level, realization) job, score the estimators and
/// aggregate the ensemble statistics. When `out` is given, per-realization
/// time-series files are written there (if enabled).
///
/// Realizations run in parallel on the current rayon pool. A failed
/// realization is logged, counted and excluded from the statistics.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<ScenarioReport, ScenarioError> {
    let input = cfg.input_signal()?;
    let jobs: Vec<Job> = cfg
        .noise
        .level
        .iter()
        .flat_map(|&level| {
            (0..cfg.run.realizations).map(move |index| Job {
                level,
                index,
                seed: cfg.run.base_seed.wrapping_add(index as u64),
            })
        })
        .collect();

    let outcomes: Vec<JobOutcome> = jobs.par_iter().map(|job| run_realization(cfg, &input, job, out)).collect();

    let mut counts = RunCounts::default();
    let mut realizations = Vec::new();
    let mut failures = Vec::new();
    for (job, o) in jobs.iter().zip(outcomes) {
        counts.plant_simulations += o.plant_simulations;
        counts.estimator_runs += o.estimator_runs;
        match o.result {
            Ok(r) => {
                counts.realizations_ok += 1;
                realizations.push(r);
            }
            Err(error) => {
                log::warn!("realization {} ({}, seed {}) failed: {error}", job.index, job.level, job.seed);
                counts.realizations_failed += 1;
                failures.push(FailureRecord {
                    noise_level: job.level.to_string(),
                    realization: job.index,
                    seed: job.seed,
                    error,
                });
            }
        }
    }
    if realizations.is_empty() {
        return Err(ScenarioError::AllFailed);
    }

    let intervals = evaluation_intervals(cfg.input.duration);
    let mut report = ScenarioReport { intervals, realizations, failures, counts, summary: Vec::new() };
    report.summary = summarize(&report, cfg);
    Ok(report)
}

fn summarize(report: &ScenarioReport, cfg: &ScenarioConfig) -> Vec<SummaryRow> {
    let mut runs = Vec::new();
    if cfg.has(Estimator::Kalman) {
        runs.push((EstimatorRun::KF, &Quantity::MOTION[..]));
    }
    if cfg.has(Estimator::Particle) {
        for n in cfg.particle_counts() {
            runs.push((EstimatorRun::pf(n), &[Quantity::Disp, Quantity::Vel, Quantity::Acc, Quantity::Force][..]));
        }
    }
    let intervals: Vec<(f64, f64)> = report.intervals.intervals().collect();
    let mut rows = Vec::new();
    for &level in &cfg.noise.level {
        for &(run, quantities) in &runs {
            for &q in quantities {
                for (i, &interval) in intervals.iter().enumerate() {
                    if let Some(stats) = report.stats(level, run, q, i) {
                        rows.push(SummaryRow { run, quantity: q, level, interval, stats });
                    }
                }
            }
        }
    }
    rows
}

/// NRMSE of a nominal model against the actual plant at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub frequency_hz: f64,
    pub model: &'static str,
    pub quantity: Quantity,
    pub nrmse: f64,
}

pub const COMPARISON_HEADER: [&str; 4] = ["frequency_hz", "model", "quantity", "nrmse"];
pub const NONLINEAR_NOMINAL: &str = "nonlinear-nominal";
pub const LINEAR_NOMINAL: &str = "linear-nominal";

/// Drive the actual, nonlinear-nominal and linear-nominal plants with
/// sinusoids and score both nominal models against the actual response.
pub fn compare_models(cfg: &ScenarioConfig) -> Result<Vec<ComparisonRow>, ScenarioError> {
    let c = &cfg.compare;
    let per_freq: Vec<Result<Vec<ComparisonRow>, ScenarioError>> = c
        .frequencies
        .par_iter()
        .map(|&f| {
            let u = sinusoid(f, c.amplitude, c.duration, cfg.input.fs)?;
            let actual = cfg.actual_plant().simulate(&u, cfg.run.substeps)?;
            let nominal = cfg.nominal_plant().simulate(&u, cfg.run.substeps)?;
            let linear = simulate_linear(&LinearModel::identified(), &u)?;
            let pairs = [
                (NONLINEAR_NOMINAL, Quantity::Disp, nominal.disp(), actual.disp()),
                (NONLINEAR_NOMINAL, Quantity::Vel, nominal.vel(), actual.vel()),
                (NONLINEAR_NOMINAL, Quantity::Acc, nominal.acc(), actual.acc()),
                (LINEAR_NOMINAL, Quantity::Disp, linear.disp, actual.disp()),
                (LINEAR_NOMINAL, Quantity::Vel, linear.vel, actual.vel()),
                (LINEAR_NOMINAL, Quantity::Acc, linear.acc, actual.acc()),
            ];
            pairs
                .into_iter()
                .map(|(model, quantity, est, truth)| {
                    Ok(ComparisonRow { frequency_hz: f, model, quantity, nrmse: nrmse(&est, &truth)? })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_freq {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<(), OutputError> {
    write_csv(
        path,
        &COMPARISON_HEADER,
        rows.iter().map(|r| vec![num(r.frequency_hz), r.model.to_string(), r.quantity.to_string(), num(r.nrmse)]),
    )
}

pub const SIMULATION_HEADER: [&str; 14] = [
    "t",
    "command",
    "actual_disp",
    "actual_vel",
    "actual_acc",
    "actual_force",
    "nominal_disp",
    "nominal_vel",
    "nominal_acc",
    "nominal_force",
    "linear_disp",
    "linear_vel",
    "linear_acc",
    "command_error",
];

/// Plant-only run of the configured input through all three plant models.
pub fn simulate_plants(cfg: &ScenarioConfig, path: &Path) -> Result<usize, ScenarioError> {
    let u = cfg.input_signal()?;
    let actual = cfg.actual_plant().simulate(&u, cfg.run.substeps)?;
    let nominal = cfg.nominal_plant().simulate(&u, cfg.run.substeps)?;
    let linear = simulate_linear(&LinearModel::identified(), &u)?;
    let cols = [
        u.clone(),
        actual.disp(),
        actual.vel(),
        actual.acc(),
        actual.force(),
        nominal.disp(),
        nominal.vel(),
        nominal.acc(),
        nominal.force(),
        linear.disp,
        linear.vel,
        linear.acc,
    ];
    let rows = (0..u.len()).map(|i| {
        let mut row = vec![num(u.time(i))];
        row.extend(cols.iter().map(|c| num(c.values()[i])));
        row.push(num(u.values()[i] - actual.states[i].x));
        row
    });
    write_csv(path, &SIMULATION_HEADER, rows)?;
    Ok(u.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InputKind;

    fn tiny() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.input.duration = 1.5;
        cfg.pf.particles = vec![16, 8];
        cfg.run.realizations = 2;
        cfg.run.timeseries = false;
        cfg
    }

    #[test]
    fn default_intervals() {
        assert_eq!(evaluation_intervals(30.0).boundaries(), &[0.0, 10.0, 20.0, 30.0]);
    }

    #[test]
    fn summary_axes() {
        let cfg = tiny();
        let report = run_scenario(&cfg, None).unwrap();
        // KF: 3 quantities; PF: 2 counts × 4 quantities; 3 intervals each.
        assert_eq!(report.summary.len(), (3 + 2 * 4) * 3);
        assert!(report.summary.iter().all(|r| r.stats.n == 2));
        assert_eq!(report.counts, RunCounts { plant_simulations: 2, estimator_runs: 6, realizations_ok: 2, realizations_failed: 0 });
        assert_eq!(report.summary[0].run, EstimatorRun::KF);
        assert_eq!(report.summary.last().unwrap().run, EstimatorRun::pf(16));
    }

    #[test]
    fn failed_realizations_are_counted() {
        let mut cfg = tiny();
        cfg.estimators = vec![Estimator::Kalman];
        cfg.plant.a2 = -7.881e5;
        assert!(matches!(run_scenario(&cfg, None), Err(ScenarioError::AllFailed)));
    }

    #[test]
    fn comparison_rows() {
        let mut cfg = ScenarioConfig::default();
        cfg.compare.duration = 1.0;
        cfg.input.kind = InputKind::Sinusoid;
        let rows = compare_models(&cfg).unwrap();
        assert_eq!(rows.len(), 4 * 6);
        assert!(rows.iter().all(|r| r.nrmse.is_finite() && r.nrmse > 0.0));
    }
}
