//! WebAssembly bindings behind `www/index.html`.
//!
//! Each exported function returns a JSON string; the plain-Rust versions
//! underneath return typed results so they can be tested natively.

use hydrapf::particle::LikelihoodSpec;
use hydrapf::{
    chirp, kf_run, nrmse, pf_run, servo_kalman_model, simulate_linear, sinusoid, specimen_force,
    synthesize_measurements, KalmanOptions, LinearModel, NoiseLevel, PfConfig, Plant, RngStream, SpecimenKind,
    SpecimenParams, TimeSeries,
};
use nalgebra::{Matrix4, Vector4};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const FS: f64 = 1024.0;
/// Plotted series are thinned to at most this many points.
const MAX_POINTS: usize = 1500;

#[derive(Debug, Serialize)]
pub struct ModelTraces {
    pub t: Vec<f64>,
    /// Displacements in mm.
    pub command: Vec<f64>,
    pub actual: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub linear: Vec<f64>,
    /// NRMSE (%) of each nominal model against the actual plant.
    pub nrmse_nonlinear: f64,
    pub nrmse_linear: f64,
}

#[derive(Debug, Serialize)]
pub struct EstimateTraces {
    pub t: Vec<f64>,
    /// Velocities in m/s.
    pub truth: Vec<f64>,
    pub kf: Vec<f64>,
    pub pf: Vec<f64>,
    /// NRMSE (%) over the whole record, keyed by quantity.
    pub kf_nrmse: [f64; 3],
    pub pf_nrmse: [f64; 3],
    pub degenerate_steps: usize,
}

#[derive(Debug, Serialize)]
pub struct RestoringCurves {
    /// Displacement in mm.
    pub x: Vec<f64>,
    /// Static spring force in N.
    pub actual: Vec<f64>,
    pub nominal: Vec<f64>,
    pub linear: Vec<f64>,
}

fn thin(s: &TimeSeries) -> Vec<f64> {
    let step = s.len().div_ceil(MAX_POINTS).max(1);
    s.values().iter().step_by(step).copied().collect()
}

fn thin_times(s: &TimeSeries) -> Vec<f64> {
    let step = s.len().div_ceil(MAX_POINTS).max(1);
    s.times().step_by(step).collect()
}

fn mm(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| 1e3 * x).collect()
}

/// Drive the actual plant and both nominal models with a sinusoid.
pub fn model_traces(frequency_hz: f64, amplitude_mm: f64, duration_s: f64) -> Result<ModelTraces, String> {
    let input = sinusoid(frequency_hz, amplitude_mm * 1e-3, duration_s, FS).map_err(|e| e.to_string())?;
    let actual = Plant::actual().simulate(&input, 1).map_err(|e| e.to_string())?.disp();
    let nonlinear = Plant::nominal().simulate(&input, 1).map_err(|e| e.to_string())?.disp();
    let linear = simulate_linear(&LinearModel::identified(), &input).map_err(|e| e.to_string())?.disp;
    let score = |est: &TimeSeries| nrmse(est, &actual).map_err(|e| e.to_string());
    Ok(ModelTraces {
        nrmse_nonlinear: score(&nonlinear)?,
        nrmse_linear: score(&linear)?,
        t: thin_times(&input),
        command: mm(thin(&input)),
        actual: mm(thin(&actual)),
        nonlinear: mm(thin(&nonlinear)),
        linear: mm(thin(&linear)),
    })
}

/// One noisy chirp realization filtered by the KF and a PF with `particles`.
pub fn estimate_traces(level: &str, particles: usize, seed: u32, duration_s: f64) -> Result<EstimateTraces, String> {
    let level: NoiseLevel = level.parse()?;
    if particles == 0 {
        return Err("particles must be >= 1".into());
    }
    let input = chirp(0.1, 20.0, 0.0234, duration_s, FS).map_err(|e| e.to_string())?;
    let traj = Plant::actual().simulate(&input, 1).map_err(|e| e.to_string())?;
    let base = RngStream::new(u64::from(seed), 0);
    let meas = synthesize_measurements(&traj, level, &base.substream(1), &base.substream(2)).map_err(|e| e.to_string())?;

    let lm = LinearModel::identified();
    let r = LikelihoodSpec::for_level(level).sigma_d.powi(2);
    let kf_model = servo_kalman_model(&lm, input.dt(), r, 0.01).map_err(|e| e.to_string())?;
    let kf = kf_run(&kf_model, &lm, &input, &meas.disp_noisy, Vector4::zeros(), Matrix4::zeros(), KalmanOptions::default())
        .map_err(|e| e.to_string())?;
    let pf = pf_run(&PfConfig::for_level(level, particles), &input, &meas, &base.substream(3)).map_err(|e| e.to_string())?;

    let truth = [traj.disp(), traj.vel(), traj.acc()];
    let scores = |est: [&TimeSeries; 3]| -> Result<[f64; 3], String> {
        let mut out = [0.0; 3];
        for (o, (e, t)) in out.iter_mut().zip(est.iter().zip(&truth)) {
            *o = nrmse(e, t).map_err(|e| e.to_string())?;
        }
        Ok(out)
    };
    Ok(EstimateTraces {
        kf_nrmse: scores([&kf.disp, &kf.vel, &kf.acc])?,
        pf_nrmse: scores([&pf.disp, &pf.vel, &pf.acc])?,
        degenerate_steps: pf.degenerate_steps.len(),
        t: thin_times(&input),
        truth: thin(&truth[1]),
        kf: thin(&kf.vel),
        pf: thin(&pf.vel),
    })
}

/// Static restoring force of the true and assumed specimens.
pub fn restoring(kn_actual: f64, kn_nominal: f64, lambda: f64, x_max_mm: f64) -> Result<RestoringCurves, String> {
    let actual = SpecimenParams { k_n: kn_actual, lambda, ..SpecimenParams::ACTUAL };
    let nominal = SpecimenParams { k_n: kn_nominal, lambda, ..SpecimenParams::NOMINAL };
    actual.validate().map_err(|e| e.to_string())?;
    nominal.validate().map_err(|e| e.to_string())?;
    if !(x_max_mm > 0.0 && x_max_mm.is_finite()) {
        return Err("range must be positive".into());
    }
    let n = 401;
    let x: Vec<f64> = (0..n).map(|i| x_max_mm * (2.0 * i as f64 / (n - 1) as f64 - 1.0)).collect();
    let curve = |kind, p: &SpecimenParams| -> Result<Vec<f64>, String> {
        x.iter().map(|&xm| specimen_force(kind, p, xm * 1e-3, 0.0, 0.0).map_err(|e| e.to_string())).collect()
    };
    Ok(RestoringCurves {
        actual: curve(SpecimenKind::Arctan, &actual)?,
        nominal: curve(SpecimenKind::AlgebraicSaturation, &nominal)?,
        linear: x.iter().map(|&xm| actual.k * xm * 1e-3).collect(),
        x,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_models(frequency_hz: f64, amplitude_mm: f64, duration_s: f64) -> Result<String, JsValue> {
    to_js(model_traces(frequency_hz, amplitude_mm, duration_s))
}

#[wasm_bindgen]
pub fn estimate(level: &str, particles: usize, seed: u32, duration_s: f64) -> Result<String, JsValue> {
    to_js(estimate_traces(level, particles, seed, duration_s))
}

#[wasm_bindgen]
pub fn restoring_curves(kn_actual: f64, kn_nominal: f64, lambda: f64, x_max_mm: f64) -> Result<String, JsValue> {
    to_js(restoring(kn_actual, kn_nominal, lambda, x_max_mm))
}
