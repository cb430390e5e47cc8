//! Normalized RMS error and ensemble statistics.

use thiserror::Error;

use crate::signals::TimeSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("estimate has {estimate} samples, truth has {truth}")]
    LengthMismatch { estimate: usize, truth: usize },
    #[error("truth has zero energy")]
    ZeroEnergyTruth,
    #[error("interval [{start}, {end}) contains no samples")]
    EmptyInterval { start: f64, end: f64 },
    #[error("interval boundaries must be strictly increasing and finite")]
    InvalidBoundaries,
    #[error("no values to summarize")]
    Empty,
}

/// `(Σ(ê−x)², Σx²)` over paired samples.
pub fn error_energy(estimate: &[f64], truth: &[f64]) -> Result<(f64, f64), MetricsError> {
    if estimate.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { estimate: estimate.len(), truth: truth.len() });
    }
    Ok(estimate.iter().zip(truth).fold((0.0, 0.0), |(e, s), (a, b)| (e + (a - b).powi(2), s + b * b)))
}

/// `100·√(Σ(ê−x)² / Σx²)` over raw samples.
pub fn nrmse_slice(estimate: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    let (err, energy) = error_energy(estimate, truth)?;
    if energy == 0.0 {
        return Err(MetricsError::ZeroEnergyTruth);
    }
    Ok(100.0 * (err / energy).sqrt())
}

/// NRMSE in percent.
pub fn nrmse(estimate: &TimeSeries, truth: &TimeSeries) -> Result<f64, MetricsError> {
    nrmse_slice(estimate.values(), truth.values())
}

/// Consecutive half-open evaluation windows `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSpec {
    boundaries: Vec<f64>,
}

impl IntervalSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, MetricsError> {
        let ok = boundaries.len() >= 2
            && boundaries.iter().all(|b| b.is_finite())
            && boundaries.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(IntervalSpec { boundaries })
        } else {
            Err(MetricsError::InvalidBoundaries)
        }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// `(start, end)` of each window.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.boundaries.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn count(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Sample index range of `series` whose times fall in `[start, end)`.
    pub fn index_range(series: &TimeSeries, start: f64, end: f64) -> std::ops::Range<usize> {
        let first = series.times().position(|t| t >= start).unwrap_or(series.len());
        let last = series.times().position(|t| t >= end).unwrap_or(series.len());
        first..last.max(first)
    }
}

impl Default for IntervalSpec {
    fn default() -> Self {
        IntervalSpec { boundaries: vec![0.0, 10.0, 20.0, 30.0] }
    }
}

/// NRMSE within each interval.
pub fn interval_nrmse(estimate: &TimeSeries, truth: &TimeSeries, spec: &IntervalSpec) -> Result<Vec<f64>, MetricsError> {
    if estimate.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { estimate: estimate.len(), truth: truth.len() });
    }
    spec.intervals()
        .map(|(start, end)| {
            let r = IntervalSpec::index_range(truth, start, end);
            if r.is_empty() {
                return Err(MetricsError::EmptyInterval { start, end });
            }
            nrmse_slice(&estimate.values()[r.clone()], &truth.values()[r])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single value).
    pub std: f64,
    pub n: usize,
}

pub fn ensemble_stats(values: &[f64]) -> Result<EnsembleStats, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(EnsembleStats { mean, std, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(0.0, 0.5, values).unwrap()
    }

    #[test]
    fn nrmse_identities() {
        let x = series((0..40).map(|i| (i as f64 * 0.3).sin() + 0.1).collect());
        assert_eq!(nrmse(&x, &x).unwrap(), 0.0);
        assert_eq!(nrmse(&x.zeros_like(), &x).unwrap(), 100.0);
        let scaled = x.with_values(x.values().iter().map(|v| 1.1 * v).collect()).unwrap();
        assert!((nrmse(&scaled, &x).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(nrmse(&x, &x.zeros_like()), Err(MetricsError::ZeroEnergyTruth));
    }

    #[test]
    fn intervals_are_half_open() {
        // 0.5 s spacing: [0,10) holds indices 0..20, [10,20) holds 20..40.
        let t = series(vec![1.0; 61]);
        let spec = IntervalSpec::default();
        let ranges: Vec<_> = spec.intervals().map(|(a, b)| IntervalSpec::index_range(&t, a, b)).collect();
        assert_eq!(ranges, vec![0..20, 20..40, 40..60]);
    }

    #[test]
    fn local_error_stays_local() {
        let truth = series(vec![2.0; 61]);
        let mut est = truth.values().to_vec();
        est[25] = 3.0;
        let v = interval_nrmse(&series(est), &truth, &IntervalSpec::default()).unwrap();
        assert_eq!(v[0], 0.0);
        assert!(v[1] > 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn constant_relative_error_per_interval() {
        let truth = series((0..61).map(|i| 1.0 + i as f64).collect());
        let est = truth.with_values(truth.values().iter().map(|v| 1.05 * v).collect()).unwrap();
        for v in interval_nrmse(&est, &truth, &IntervalSpec::default()).unwrap() {
            assert!((v - 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_interval_rejected() {
        let truth = series(vec![1.0; 10]);
        assert!(matches!(
            interval_nrmse(&truth, &truth, &IntervalSpec::default()),
            Err(MetricsError::EmptyInterval { .. })
        ));
        assert!(IntervalSpec::new(vec![0.0, 10.0, 10.0]).is_err());
    }

    #[test]
    fn ensemble_examples() {
        assert_eq!(ensemble_stats(&[4.2]).unwrap(), EnsembleStats { mean: 4.2, std: 0.0, n: 1 });
        let s = ensemble_stats(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ensemble_stats(&[7.5; 20]).unwrap().std, 0.0);
        assert_eq!(ensemble_stats(&[]), Err(MetricsError::Empty));
    }
}
