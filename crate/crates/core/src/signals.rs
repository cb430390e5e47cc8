//! Excitation signals and seeded noise.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid signal parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("time series contains a non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, SignalError> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(SignalError::InvalidParameter("dt must be positive and t0 finite"));
        }
        if values.is_empty() {
            return Err(SignalError::InvalidParameter("time series must not be empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(TimeSeries { t0, dt, values })
    }

    /// Constructor for internal callers that already guarantee the invariants.
    pub(crate) fn from_parts(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        debug_assert!(dt > 0.0 && !values.is_empty());
        TimeSeries { t0, dt, values }
    }

    /// All-zero series with the same time base as `self`.
    pub fn zeros_like(&self) -> Self {
        TimeSeries::from_parts(self.t0, self.dt, vec![0.0; self.len()])
    }

    /// Same time base as `self`, different samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() != self.len() {
            return Err(SignalError::InvalidParameter("length mismatch"));
        }
        TimeSeries::new(self.t0, self.dt, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }
}

fn sample_count(duration: f64, fs: f64) -> usize {
    (duration * fs).round() as usize + 1
}

/// Linear sweep `A·sin(2π(f0·t + (f1−f0)·t²/(2T)))` sampled at `fs`.
pub fn chirp(f0: f64, f1: f64, amplitude: f64, duration: f64, fs: f64) -> Result<TimeSeries, SignalError> {
    let finite = [f0, f1, amplitude, duration, fs].iter().all(|v| v.is_finite());
    if !finite {
        return Err(SignalError::InvalidParameter("chirp parameters must be finite"));
    }
    if f0 < 0.0 || f1 <= f0 {
        return Err(SignalError::InvalidParameter("chirp requires 0 <= f0 < f1"));
    }
    if amplitude <= 0.0 || duration <= 0.0 {
        return Err(SignalError::InvalidParameter("chirp amplitude and duration must be positive"));
    }
    if fs <= 2.0 * f1 {
        return Err(SignalError::InvalidParameter("sample rate must exceed twice the final frequency"));
    }
    let dt = 1.0 / fs;
    let rate = (f1 - f0) / (2.0 * duration);
    let values = (0..sample_count(duration, fs))
        .map(|i| {
            let t = i as f64 * dt;
            amplitude * (2.0 * PI * (f0 * t + rate * t * t)).sin()
        })
        .collect();
    Ok(TimeSeries::from_parts(0.0, dt, values))
}

/// Instantaneous frequency of [`chirp`] at time `t`.
pub fn chirp_frequency(f0: f64, f1: f64, duration: f64, t: f64) -> f64 {
    f0 + (f1 - f0) * t / duration
}

/// `A·sin(2πft)` sampled at `fs`.
pub fn sinusoid(f: f64, amplitude: f64, duration: f64, fs: f64) -> Result<TimeSeries, SignalError> {
    let finite = [f, amplitude, duration, fs].iter().all(|v| v.is_finite());
    if !finite || f <= 0.0 || duration <= 0.0 {
        return Err(SignalError::InvalidParameter("sinusoid requires f > 0 and duration > 0"));
    }
    if fs <= 2.0 * f {
        return Err(SignalError::InvalidParameter("sample rate must exceed twice the frequency"));
    }
    let dt = 1.0 / fs;
    let values = (0..sample_count(duration, fs))
        .map(|i| amplitude * (2.0 * PI * f * i as f64 * dt).sin())
        .collect();
    Ok(TimeSeries::from_parts(0.0, dt, values))
}

/// `n` i.i.d. N(0, std²) samples drawn from `stream`, spaced `dt` apart.
pub fn gaussian_noise(std: f64, n: usize, dt: f64, stream: &RngStream) -> Result<TimeSeries, SignalError> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(SignalError::InvalidParameter("noise std must be finite and >= 0"));
    }
    if n == 0 {
        return Err(SignalError::InvalidParameter("noise length must be >= 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SignalError::InvalidParameter("dt must be positive"));
    }
    let mut rng = stream.rng();
    let values = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect();
    Ok(TimeSeries::from_parts(0.0, dt, values))
}
