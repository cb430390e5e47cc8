//! Bootstrap particle filter.
//!
//! The generic core works on any [`StateSpaceModel`] with a fixed-size state.
//! The servo-specific wrappers ([`pf_init`], [`pf_predict`], [`pf_weight`],
//! [`pf_run`]) drive it with the nonlinear nominal plant, weighting each
//! particle against measured displacement and force.
//!
//! Every random draw is keyed by (step, particle index) on a counter-based
//! stream, and every reduction runs sequentially in particle order, so the
//! output does not depend on how many threads evaluate the particles.

use std::f64::consts::PI;

use nalgebra::{SVector, Vector4};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::model::{PlantState, SpecimenKind, SpecimenParams};
use crate::plants::{
    MeasurementSet, NoiseLevel, Plant, DESIGN_DISP_VARIANCE, DESIGN_FORCE_VARIANCE,
};
use crate::rng::{CounterRng, RngStream};
use crate::signals::TimeSeries;

/// Default bandwidth used to scale process and prior noise across derivative states.
pub const DEFAULT_OMEGA_REF: f64 = 2.0 * PI * 10.0;
/// `σ_d² / σ_p²` for the low and moderate noise levels.
pub const PROCESS_RATIO_LOW_NOISE: f64 = 400.0;
/// `σ_d² / σ_p²` for the high noise level.
pub const PROCESS_RATIO_HIGH_NOISE: f64 = 1000.0;
/// Fraction of degenerate steps above which a run is flagged.
pub const DEGENERATE_FLAG_FRACTION: f64 = 0.01;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PfError {
    #[error("invalid particle filter parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("particle {particle} became non-finite at step {step}")]
    Diverged { step: usize, particle: usize },
    #[error("every particle has zero likelihood")]
    DegenerateLikelihood,
    #[error("weights sum to {0}, expected 1")]
    Unnormalized(f64),
    #[error("input and measurement series are not aligned")]
    Misaligned,
}

/// Weighted particle set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<const D: usize = 4> {
    pub particles: Vec<SVector<f64, D>>,
    pub weights: Vec<f64>,
}

impl<const D: usize> ParticleEnsemble<D> {
    /// Equally weighted ensemble.
    pub fn uniform(particles: Vec<SVector<f64, D>>) -> Result<Self, PfError> {
        if particles.is_empty() {
            return Err(PfError::InvalidParameter("ensemble needs at least one particle"));
        }
        let n = particles.len();
        Ok(ParticleEnsemble { particles, weights: vec![1.0 / n as f64; n] })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gaussian prior with independent components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec<const D: usize = 4> {
    pub mean: SVector<f64, D>,
    pub stds: SVector<f64, D>,
}

impl PriorSpec<4> {
    /// Zero mean with stds `(σ, σ·ω, σ·ω², σ·ω³)`.
    pub fn scaled(sigma_d: f64, omega_ref: f64) -> Self {
        PriorSpec { mean: PlantState::ZERO.to_vector(), stds: power_scaled(sigma_d, omega_ref) }
    }
}

fn power_scaled(sigma: f64, omega: f64) -> Vector4<f64> {
    Vector4::new(sigma, sigma * omega, sigma * omega.powi(2), sigma * omega.powi(3))
}

/// Additive process noise on the four plant states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoiseSpec {
    /// Displacement-channel std (m).
    pub sigma_p: f64,
    /// Bandwidth scale (rad/s).
    pub omega_ref: f64,
}

impl ProcessNoiseSpec {
    /// `σ_p = √(σ_d² / ratio)` with the design displacement variance.
    pub fn from_ratio(ratio: f64, omega_ref: f64) -> Self {
        ProcessNoiseSpec { sigma_p: (DESIGN_DISP_VARIANCE / ratio).sqrt(), omega_ref }
    }

    /// Default tuning for a noise level.
    pub fn for_level(level: NoiseLevel) -> Self {
        let ratio = match level {
            NoiseLevel::L3 => PROCESS_RATIO_HIGH_NOISE,
            _ => PROCESS_RATIO_LOW_NOISE,
        };
        Self::from_ratio(ratio, DEFAULT_OMEGA_REF)
    }

    /// Per-state stds `(σ_p, σ_p·ω, σ_p·ω², σ_p·ω³)`.
    pub fn stds(&self) -> Vector4<f64> {
        power_scaled(self.sigma_p, self.omega_ref)
    }

    pub fn validate(&self) -> Result<(), PfError> {
        if !(self.sigma_p >= 0.0 && self.sigma_p.is_finite()) {
            return Err(PfError::InvalidParameter("sigma_p must be finite and >= 0"));
        }
        if !(self.omega_ref > 0.0 && self.omega_ref.is_finite()) {
            return Err(PfError::InvalidParameter("omega_ref must be positive"));
        }
        Ok(())
    }
}

/// Independent Gaussian measurement noise on displacement and force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodSpec {
    /// Displacement std (m).
    pub sigma_d: f64,
    /// Force std (N).
    pub sigma_f: f64,
}

impl LikelihoodSpec {
    /// Design variances scaled by the level's std ratio. A noise-free level
    /// uses the moderate-noise tuning.
    pub fn for_level(level: NoiseLevel) -> Self {
        let r = match level {
            NoiseLevel::Off => 1.0,
            other => other.scale(),
        };
        LikelihoodSpec { sigma_d: r * DESIGN_DISP_VARIANCE.sqrt(), sigma_f: r * DESIGN_FORCE_VARIANCE.sqrt() }
    }

    pub fn validate(&self) -> Result<(), PfError> {
        let ok = |s: f64| s > 0.0 && s.is_finite();
        if ok(self.sigma_d) && ok(self.sigma_f) {
            Ok(())
        } else {
            Err(PfError::InvalidParameter("likelihood stds must be positive"))
        }
    }

    /// Gaussian log-likelihood up to a constant.
    #[inline]
    pub fn log_likelihood(&self, rd: f64, rf: f64) -> f64 {
        -0.5 * (rd / self.sigma_d).powi(2) - 0.5 * (rf / self.sigma_f).powi(2)
    }
}

/// Process and observation model driven by the bootstrap filter.
pub trait StateSpaceModel<const D: usize>: Sync {
    type Obs: Sync;

    /// Draw `x[k+1]` given `x[k]` and the command held over the step.
    fn transition(&self, x: &SVector<f64, D>, u: f64, rng: &mut CounterRng) -> SVector<f64, D>;

    /// `ln p(y | x)` up to an additive constant shared by all particles.
    fn log_likelihood(&self, x: &SVector<f64, D>, y: &Self::Obs) -> f64;
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

fn standard_normals<const D: usize>(rng: &mut CounterRng) -> SVector<f64, D> {
    SVector::<f64, D>::from_fn(|_, _| StandardNormal.sample(rng))
}

/// `n` independent Gaussian draws from `prior`, weighted `1/n`.
pub fn init_gaussian<const D: usize>(
    n: usize,
    prior: &PriorSpec<D>,
    stream: &RngStream,
) -> Result<ParticleEnsemble<D>, PfError> {
    if n == 0 {
        return Err(PfError::InvalidParameter("particle count must be >= 1"));
    }
    if prior.stds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || prior.mean.iter().any(|m| !m.is_finite()) {
        return Err(PfError::InvalidParameter("prior must be finite with stds >= 0"));
    }
    let particles = map_indexed(n, |i| {
        let mut rng = stream.keyed(0, i as u64);
        prior.mean + prior.stds.component_mul(&standard_normals(&mut rng))
    });
    ParticleEnsemble::uniform(particles)
}

/// Propagate every particle through `model` with per-particle draws keyed by
/// `(step, index)`. Weights are unchanged.
pub fn predict<const D: usize, M: StateSpaceModel<D>>(
    model: &M,
    e: &ParticleEnsemble<D>,
    u: f64,
    stream: &RngStream,
    step: usize,
) -> Result<ParticleEnsemble<D>, PfError> {
    let particles = map_indexed(e.len(), |i| {
        let mut rng = stream.keyed(step as u64, i as u64);
        model.transition(&e.particles[i], u, &mut rng)
    });
    if let Some(particle) = particles.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(PfError::Diverged { step, particle });
    }
    Ok(ParticleEnsemble { particles, weights: e.weights.clone() })
}

/// Normalized weights from log-likelihoods, computed after subtracting the
/// maximum so a common offset cancels before exponentiation.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>, PfError> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(PfError::DegenerateLikelihood);
    }
    let mut w: Vec<f64> = log_w.iter().map(|l| if l.is_nan() { 0.0 } else { (l - max).exp() }).collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    Ok(w)
}

/// Replace the weights with the normalized likelihood of `y` under each
/// particle. Resampling every step leaves the prior weights uniform, so they
/// do not enter.
pub fn weight<const D: usize, M: StateSpaceModel<D>>(
    model: &M,
    e: &ParticleEnsemble<D>,
    y: &M::Obs,
) -> Result<ParticleEnsemble<D>, PfError> {
    let log_w = map_indexed(e.len(), |i| model.log_likelihood(&e.particles[i], y));
    let weights = normalize_log_weights(&log_w)?;
    Ok(ParticleEnsemble { particles: e.particles.clone(), weights })
}

/// Multinomial resampling with explicit uniforms on (0, 1]. Uniform `u`
/// selects the index `M` with `Σ_{j<M} q_j < u ≤ Σ_{j≤M} q_j`.
pub fn resample_with_uniforms<const D: usize>(
    e: &ParticleEnsemble<D>,
    uniforms: &[f64],
) -> Result<ParticleEnsemble<D>, PfError> {
    let total = e.weight_sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL || e.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(PfError::Unnormalized(total));
    }
    let cdf: Vec<f64> = e
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let last_positive = e.weights.iter().rposition(|&w| w > 0.0).unwrap_or(e.len() - 1);
    let particles = uniforms
        .iter()
        .map(|&u| {
            let idx = cdf.partition_point(|&c| c < u);
            e.particles[idx.min(last_positive)]
        })
        .collect();
    ParticleEnsemble::uniform(particles)
}

/// Multinomial resampling with `N` uniforms drawn from `rng`.
pub fn resample_multinomial<const D: usize>(
    e: &ParticleEnsemble<D>,
    rng: &mut CounterRng,
) -> Result<ParticleEnsemble<D>, PfError> {
    let uniforms: Vec<f64> = (0..e.len()).map(|_| rng.uniform_open_closed()).collect();
    resample_with_uniforms(e, &uniforms)
}

/// Unweighted componentwise mean.
pub fn pf_estimate<const D: usize>(e: &ParticleEnsemble<D>) -> SVector<f64, D> {
    let sum = e.particles.iter().fold(SVector::<f64, D>::zeros(), |acc, p| acc + p);
    sum / e.len() as f64
}

/// Per-step state estimates and the steps where the likelihood update was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput<const D: usize> {
    pub means: Vec<SVector<f64, D>>,
    pub degenerate_steps: Vec<usize>,
}

/// Random streams used by the filter, derived from one parent stream.
#[derive(Debug, Clone, Copy)]
struct FilterStreams {
    init: RngStream,
    process: RngStream,
    resample: RngStream,
}

impl FilterStreams {
    fn new(parent: &RngStream) -> Self {
        FilterStreams { init: parent.substream(0), process: parent.substream(1), resample: parent.substream(2) }
    }
}

/// Bootstrap filter loop: at each sample, predict with the previous command
/// (skipped at the first sample), weight, resample, and record the mean.
///
/// If every particle has zero likelihood the update is skipped for that step,
/// leaving the predicted particles unchanged, and the step is recorded.
pub fn bootstrap_filter<const D: usize, M: StateSpaceModel<D>>(
    model: &M,
    n: usize,
    prior: &PriorSpec<D>,
    inputs: &[f64],
    observations: &[M::Obs],
    stream: &RngStream,
) -> Result<FilterOutput<D>, PfError> {
    if inputs.len() != observations.len() {
        return Err(PfError::Misaligned);
    }
    let streams = FilterStreams::new(stream);
    let mut e = init_gaussian(n, prior, &streams.init)?;
    let mut means = Vec::with_capacity(inputs.len());
    let mut degenerate_steps = Vec::new();
    for (k, y) in observations.iter().enumerate() {
        if k > 0 {
            e = predict(model, &e, inputs[k - 1], &streams.process, k)?;
        }
        match weight(model, &e, y) {
            Ok(weighted) => {
                let mut rng = streams.resample.keyed(k as u64, 0);
                e = resample_multinomial(&weighted, &mut rng)?;
            }
            Err(PfError::DegenerateLikelihood) => degenerate_steps.push(k),
            Err(other) => return Err(other),
        }
        means.push(pf_estimate(&e));
    }
    Ok(FilterOutput { means, degenerate_steps })
}

/// Nominal servo plant with additive Gaussian process noise, observed
/// through displacement and specimen force.
#[derive(Debug, Clone, Copy)]
pub struct ServoModel {
    pub plant: Plant,
    pub dt: f64,
    pub process_stds: Vector4<f64>,
    pub likelihood: LikelihoodSpec,
}

impl ServoModel {
    pub fn new(plant: Plant, dt: f64, q: &ProcessNoiseSpec, ls: &LikelihoodSpec) -> Result<Self, PfError> {
        q.validate()?;
        ls.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PfError::InvalidParameter("dt must be positive"));
        }
        Ok(ServoModel { plant, dt, process_stds: q.stds(), likelihood: *ls })
    }

    #[inline]
    fn predicted_force(&self, x: &Vector4<f64>) -> f64 {
        let sp = &self.plant.specimen;
        crate::model::specimen_force(self.plant.kind, sp, x[0], x[1], x[2]).unwrap_or(f64::NAN)
    }
}

impl StateSpaceModel<4> for ServoModel {
    /// (displacement m, force N)
    type Obs = (f64, f64);

    #[inline]
    fn transition(&self, x: &Vector4<f64>, u: f64, rng: &mut CounterRng) -> Vector4<f64> {
        let w = self.process_stds.component_mul(&standard_normals(rng));
        match self.plant.step(x, u, self.dt, 1) {
            Ok(next) => next + w,
            Err(_) => Vector4::repeat(f64::NAN),
        }
    }

    #[inline]
    fn log_likelihood(&self, x: &Vector4<f64>, y: &(f64, f64)) -> f64 {
        self.likelihood.log_likelihood(y.0 - x[0], y.1 - self.predicted_force(x))
    }
}

/// `N` particles drawn from the prior over plant states.
pub fn pf_init(n: usize, prior: &PriorSpec, stream: &RngStream) -> Result<ParticleEnsemble, PfError> {
    init_gaussian(n, prior, stream)
}

/// One nominal-plant step per particle with independent process noise.
pub fn pf_predict(
    e: &ParticleEnsemble,
    u_k: f64,
    dt: f64,
    q: &ProcessNoiseSpec,
    sp: &SpecimenParams,
    stream: &RngStream,
    step: usize,
) -> Result<ParticleEnsemble, PfError> {
    let plant = nominal_plant(sp);
    let model = ServoModel::new(plant, dt, q, &LikelihoodSpec { sigma_d: 1.0, sigma_f: 1.0 })?;
    predict(&model, e, u_k, stream, step)
}

/// Weight particles against measured displacement `y_d` and force `y_f`.
pub fn pf_weight(
    e: &ParticleEnsemble,
    y_d: f64,
    y_f: f64,
    ls: &LikelihoodSpec,
    sp: &SpecimenParams,
) -> Result<ParticleEnsemble, PfError> {
    let q = ProcessNoiseSpec { sigma_p: 0.0, omega_ref: 1.0 };
    let model = ServoModel::new(nominal_plant(sp), 1.0, &q, ls)?;
    weight(&model, e, &(y_d, y_f))
}

fn nominal_plant(sp: &SpecimenParams) -> Plant {
    Plant { kind: SpecimenKind::AlgebraicSaturation, specimen: *sp, ..Plant::nominal() }
}

/// Servo filter configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfConfig {
    pub particles: usize,
    pub prior: PriorSpec,
    pub process: ProcessNoiseSpec,
    pub likelihood: LikelihoodSpec,
    /// Process model; normally the nonlinear nominal plant.
    pub plant: Plant,
}

impl PfConfig {
    /// Default tuning for `level` with `n` particles.
    pub fn for_level(level: NoiseLevel, n: usize) -> Self {
        let process = ProcessNoiseSpec::for_level(level);
        let likelihood = LikelihoodSpec::for_level(level);
        PfConfig {
            particles: n,
            prior: PriorSpec::scaled(likelihood.sigma_d, process.omega_ref),
            process,
            likelihood,
            plant: Plant::nominal(),
        }
    }
}

/// Estimated servo trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PfEstimates {
    pub disp: TimeSeries,
    pub vel: TimeSeries,
    pub acc: TimeSeries,
    pub force: TimeSeries,
    pub degenerate_steps: Vec<usize>,
    /// More than 1% of steps skipped their likelihood update.
    pub degenerate_flagged: bool,
}

/// Run the servo particle filter over a measured record.
pub fn pf_run(
    cfg: &PfConfig,
    input: &TimeSeries,
    meas: &MeasurementSet,
    stream: &RngStream,
) -> Result<PfEstimates, PfError> {
    if input.len() != meas.disp_noisy.len() || input.len() != meas.force_noisy.len() || input.dt() != meas.disp_noisy.dt() {
        return Err(PfError::Misaligned);
    }
    let model = ServoModel::new(cfg.plant, input.dt(), &cfg.process, &cfg.likelihood)?;
    let obs: Vec<(f64, f64)> = meas.disp_noisy.values().iter().copied().zip(meas.force_noisy.values().iter().copied()).collect();
    let out = bootstrap_filter(&model, cfg.particles, &cfg.prior, input.values(), &obs, stream)?;

    let series = |f: &dyn Fn(&Vector4<f64>) -> f64| {
        input.with_values(out.means.iter().map(f).collect()).map_err(|_| PfError::Diverged { step: 0, particle: 0 })
    };
    let flagged = out.degenerate_steps.len() as f64 > DEGENERATE_FLAG_FRACTION * input.len() as f64;
    Ok(PfEstimates {
        disp: series(&|x| x[0])?,
        vel: series(&|x| x[1])?,
        acc: series(&|x| x[2])?,
        force: series(&|x| model.predicted_force(x))?,
        degenerate_flagged: flagged,
        degenerate_steps: out.degenerate_steps,
    })
}

/// Scalar linear-Gaussian reference model: `x' = a·x + b·u + w`,
/// `y = x + v`, with `w ~ N(0, q)` and `v ~ N(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLinearGaussian {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
}

impl StateSpaceModel<1> for ScalarLinearGaussian {
    type Obs = f64;

    fn transition(&self, x: &SVector<f64, 1>, u: f64, rng: &mut CounterRng) -> SVector<f64, 1> {
        let z: f64 = StandardNormal.sample(rng);
        SVector::<f64, 1>::new(self.a * x[0] + self.b * u + self.q.sqrt() * z)
    }

    fn log_likelihood(&self, x: &SVector<f64, 1>, y: &f64) -> f64 {
        -0.5 * (y - x[0]).powi(2) / self.r
    }
}
