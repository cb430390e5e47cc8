//! Forward simulation of the actual, nonlinear-nominal and linear-nominal
//! plants, and synthesis of noisy displacement/force measurements.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, SMatrix, Vector3, Vector4};
use thiserror::Error;

use crate::integrate::{rk5_step, IntegrateError};
use crate::kalman::{discretize_zoh, KalmanError};
use crate::model::{
    specimen_force, state_derivative, ModelError, PlantState, SpecimenKind, SpecimenParams,
    TransferSystemParams,
};
use crate::rng::RngStream;
use crate::signals::{gaussian_noise, SignalError, TimeSeries};

/// Any state component beyond this magnitude (base SI units) counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Displacement measurement variance the estimators are designed around (m²).
pub const DESIGN_DISP_VARIANCE: f64 = 1.07e-6;
/// Force measurement variance at noise level 2 (N²).
pub const DESIGN_FORCE_VARIANCE: f64 = 3.30e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Discretization(#[from] KalmanError),
    #[error("integration failed at t = {time}: {source}")]
    Integration { time: f64, source: IntegrateError },
    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("substep count must be >= 1")]
    NoSubsteps,
}

/// Continuous linear model `ẋ = A·x + B·u`, `y = C·x + D·u` with outputs
/// (displacement, velocity, acceleration).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub c: SMatrix<f64, 3, 4>,
    pub d: Vector3<f64>,
}

impl LinearModel {
    /// Model identified from the actual plant by transfer-function fitting.
    pub fn identified() -> Self {
        #[rustfmt::skip]
        let a = Matrix4::new(
            -275.92, -2.36e5, -6.43e7, -6.92e8,
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        #[rustfmt::skip]
        let c = SMatrix::<f64, 3, 4>::new(
            0.0, 0.0, 0.0, 6.90e8,
            0.0, 0.0, 6.90e8, 0.0,
            0.0, 6.90e8, 0.0, 0.0,
        );
        LinearModel { a, b: Vector4::new(1.0, 0.0, 0.0, 0.0), c, d: Vector3::zeros() }
    }

    /// Static gain `−C·A⁻¹·B` from command to each output.
    pub fn dc_gain(&self) -> Option<Vector3<f64>> {
        let x = self.a.lu().solve(&self.b)?;
        Some(-(self.c * x))
    }
}

impl Default for LinearModel {
    fn default() -> Self {
        Self::identified()
    }
}

/// One of the two canonical-form plants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub kind: SpecimenKind,
    pub specimen: SpecimenParams,
    pub transfer: TransferSystemParams,
}

impl Plant {
    pub fn new(
        kind: SpecimenKind,
        specimen: SpecimenParams,
        transfer: TransferSystemParams,
    ) -> Result<Self, PlantError> {
        specimen.validate()?;
        transfer.validate()?;
        Ok(Plant { kind, specimen, transfer })
    }

    /// Arctan specimen with the default physical constants.
    pub fn actual() -> Self {
        Plant {
            kind: SpecimenKind::Arctan,
            specimen: SpecimenParams::ACTUAL,
            transfer: TransferSystemParams::default(),
        }
    }

    /// Algebraic-saturation specimen with the default nominal constants.
    pub fn nominal() -> Self {
        Plant {
            kind: SpecimenKind::AlgebraicSaturation,
            specimen: SpecimenParams::NOMINAL,
            transfer: TransferSystemParams::default(),
        }
    }

    #[inline]
    pub fn derivative(&self, s: &Vector4<f64>, u: f64) -> Vector4<f64> {
        state_derivative(self.kind, &self.specimen, &self.transfer, s, u)
    }

    /// Advance one sample interval `dt` with the command held at `u`.
    #[inline]
    pub fn step(&self, s: &Vector4<f64>, u: f64, dt: f64, substeps: usize) -> Result<Vector4<f64>, IntegrateError> {
        let h = dt / substeps as f64;
        let field = |_: f64, y: &Vector4<f64>| self.derivative(y, u);
        let mut out = *s;
        for _ in 0..substeps {
            out = rk5_step(&field, &out, 0.0, h)?;
        }
        Ok(out)
    }

    pub fn force(&self, s: &PlantState) -> Result<f64, ModelError> {
        specimen_force(self.kind, &self.specimen, s.x, s.x1, s.x2)
    }

    /// Simulate from rest under a zero-order-held command.
    pub fn simulate(&self, input: &TimeSeries, substeps: usize) -> Result<PlantTrajectory, PlantError> {
        if substeps == 0 {
            return Err(PlantError::NoSubsteps);
        }
        let dt = input.dt();
        let mut states = Vec::with_capacity(input.len());
        let mut forces = Vec::with_capacity(input.len());
        let mut s = Vector4::zeros();
        for (i, &u) in input.values().iter().enumerate() {
            let st = PlantState::from_vector(&s);
            forces.push(self.force(&st)?);
            states.push(st);
            if i + 1 == input.len() {
                break;
            }
            let time = input.time(i);
            s = self
                .step(&s, u, dt, substeps)
                .map_err(|source| PlantError::Integration { time, source })?;
            if s.iter().any(|v| v.abs() > DIVERGENCE_LIMIT) {
                return Err(PlantError::Diverged { time: input.time(i + 1) });
            }
        }
        Ok(PlantTrajectory { states, forces, input: input.clone() })
    }
}

/// Sampled plant response.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTrajectory {
    pub states: Vec<PlantState>,
    pub forces: Vec<f64>,
    pub input: TimeSeries,
}

impl PlantTrajectory {
    fn channel(&self, f: impl Fn(&PlantState) -> f64) -> TimeSeries {
        TimeSeries::from_parts(self.input.t0(), self.input.dt(), self.states.iter().map(f).collect())
    }

    pub fn disp(&self) -> TimeSeries {
        self.channel(|s| s.x)
    }

    pub fn vel(&self) -> TimeSeries {
        self.channel(|s| s.x1)
    }

    pub fn acc(&self) -> TimeSeries {
        self.channel(|s| s.x2)
    }

    pub fn force(&self) -> TimeSeries {
        TimeSeries::from_parts(self.input.t0(), self.input.dt(), self.forces.clone())
    }
}

/// Simulate the true plant (arctan specimen).
pub fn simulate_actual(
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    input: &TimeSeries,
    substeps: usize,
) -> Result<PlantTrajectory, PlantError> {
    Plant::new(SpecimenKind::Arctan, *sp, *tp)?.simulate(input, substeps)
}

/// Simulate the nonlinear nominal plant (algebraic-saturation specimen).
pub fn simulate_nominal(
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    input: &TimeSeries,
    substeps: usize,
) -> Result<PlantTrajectory, PlantError> {
    Plant::new(SpecimenKind::AlgebraicSaturation, *sp, *tp)?.simulate(input, substeps)
}

/// Process model of the particle filter: one RK5 step of the nominal plant
/// with the command held at `u_k`, plus additive noise `w_k`.
pub fn nominal_transition(
    plant: &Plant,
    s: &PlantState,
    u_k: f64,
    dt: f64,
    w_k: &Vector4<f64>,
) -> Result<PlantState, PlantError> {
    if !(dt > 0.0) {
        return Err(PlantError::Integration { time: 0.0, source: IntegrateError::InvalidStep("dt must be positive") });
    }
    let next = plant
        .step(&s.to_vector(), u_k, dt, 1)
        .map_err(|source| PlantError::Integration { time: 0.0, source })?
        + w_k;
    let out = PlantState::from_vector(&next);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(PlantError::Model(ModelError::NonFinite("nominal transition")))
    }
}

/// Outputs of the linear nominal model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearResponse {
    pub disp: TimeSeries,
    pub vel: TimeSeries,
    pub acc: TimeSeries,
}

/// Simulate the linear nominal model from rest with a zero-order-hold
/// discretization at the input's sample interval.
pub fn simulate_linear(lm: &LinearModel, input: &TimeSeries) -> Result<LinearResponse, PlantError> {
    let (ad, bd) = discretize_zoh(&lm.a, &lm.b, input.dt())?;
    let mut x = Vector4::zeros();
    let mut out = [Vec::with_capacity(input.len()), Vec::with_capacity(input.len()), Vec::with_capacity(input.len())];
    for &u in input.values() {
        let y = lm.c * x + lm.d * u;
        for (o, v) in out.iter_mut().zip(y.iter()) {
            o.push(*v);
        }
        x = ad * x + bd * u;
    }
    let [disp, vel, acc] = out.map(|v| input.with_values(v));
    Ok(LinearResponse { disp: disp?, vel: vel?, acc: acc? })
}

/// Measurement noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseLevel {
    /// Noise-free measurements.
    Off,
    L1,
    L2,
    L3,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 3] = [NoiseLevel::L1, NoiseLevel::L2, NoiseLevel::L3];

    /// Displacement noise standard deviation (m).
    pub fn displacement_std(self) -> f64 {
        match self {
            NoiseLevel::Off => 0.0,
            NoiseLevel::L1 => 0.2e-3,
            NoiseLevel::L2 => 1.0e-3,
            NoiseLevel::L3 => 2.1e-3,
        }
    }

    /// Ratio of this level's displacement std to level 2's.
    pub fn scale(self) -> f64 {
        self.displacement_std() / NoiseLevel::L2.displacement_std()
    }

    /// Force noise standard deviation (N), scaled from the level-2 anchor.
    pub fn force_std(self) -> f64 {
        self.scale() * DESIGN_FORCE_VARIANCE.sqrt()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::Off => "off",
            NoiseLevel::L1 => "L1",
            NoiseLevel::L2 => "L2",
            NoiseLevel::L3 => "L3",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" | "l0" => Ok(NoiseLevel::Off),
            "l1" | "1" => Ok(NoiseLevel::L1),
            "l2" | "2" => Ok(NoiseLevel::L2),
            "l3" | "3" => Ok(NoiseLevel::L3),
            other => Err(format!("unknown noise level `{other}` (expected off, L1, L2 or L3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub disp_clean: TimeSeries,
    pub disp_noisy: TimeSeries,
    pub force_clean: TimeSeries,
    pub force_noisy: TimeSeries,
    pub noise_level: NoiseLevel,
}

/// Add independent Gaussian noise to the displacement and force of `traj`.
pub fn synthesize_measurements(
    traj: &PlantTrajectory,
    level: NoiseLevel,
    disp_stream: &RngStream,
    force_stream: &RngStream,
) -> Result<MeasurementSet, PlantError> {
    let disp_clean = traj.disp();
    let force_clean = traj.force();
    let n = disp_clean.len();
    let dn = gaussian_noise(level.displacement_std(), n, disp_clean.dt(), disp_stream)?;
    let fn_ = gaussian_noise(level.force_std(), n, disp_clean.dt(), force_stream)?;
    let add = |clean: &TimeSeries, noise: &TimeSeries| {
        clean.with_values(clean.values().iter().zip(noise.values()).map(|(a, b)| a + b).collect())
    };
    Ok(MeasurementSet {
        disp_noisy: add(&disp_clean, &dn)?,
        force_noisy: add(&force_clean, &fn_)?,
        disp_clean,
        force_clean,
        noise_level: level,
    })
}
