//! Discrete linear Kalman filter with a scalar measurement.

use nalgebra::{DMatrix, SMatrix, SVector};
use thiserror::Error;

use crate::expm::expm;
use crate::plants::LinearModel;
use crate::signals::TimeSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KalmanError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix exponential did not converge")]
    ExpmNotConverged,
    #[error("innovation covariance {0} is not positive")]
    InnovationNotPositive(f64),
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("input and measurement series are not aligned")]
    Misaligned,
    #[error("steady-state gain did not converge within {0} iterations")]
    RiccatiNotConverged(usize),
    #[error("at t = {time}: {source}")]
    At {
        time: f64,
        #[source]
        source: Box<KalmanError>,
    },
}

/// Zero-order-hold discretization of `ẋ = A·x + B·u` over `dt`.
///
/// Uses the exponential of the augmented matrix `[[A, B], [0, 0]]·dt`, whose
/// top blocks are `exp(A·dt)` and `∫₀^dt exp(A·s) ds · B`. That integral form
/// is valid whether or not `A` is invertible.
pub fn discretize_zoh<const D: usize>(
    a: &SMatrix<f64, D, D>,
    b: &SVector<f64, D>,
    dt: f64,
) -> Result<(SMatrix<f64, D, D>, SVector<f64, D>), KalmanError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KalmanError::InvalidModel("dt must be positive"));
    }
    let mut aug = DMatrix::<f64>::zeros(D + 1, D + 1);
    aug.view_mut((0, 0), (D, D)).copy_from(&(a * dt));
    aug.view_mut((0, D), (D, 1)).copy_from(&(b * dt));
    let e = expm(&aug)?;
    let ad = SMatrix::<f64, D, D>::from_fn(|i, j| e[(i, j)]);
    let bd = SVector::<f64, D>::from_fn(|i, _| e[(i, D)]);
    Ok((ad, bd))
}

/// `x[k+1] = Ad·x[k] + Bd·u[k] + w`, `y[k] = H·x[k] + v`, with scalar `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLinearModel<const D: usize> {
    pub ad: SMatrix<f64, D, D>,
    pub bd: SVector<f64, D>,
    /// Measurement row, stored as a column vector.
    pub h: SVector<f64, D>,
    pub q: SMatrix<f64, D, D>,
    pub r: f64,
}

impl<const D: usize> DiscreteLinearModel<D> {
    pub fn validate(&self) -> Result<(), KalmanError> {
        let finite = self.ad.iter().chain(self.bd.iter()).chain(self.h.iter()).chain(self.q.iter()).all(|v| v.is_finite());
        if !finite || !self.r.is_finite() {
            return Err(KalmanError::NonFinite("model"));
        }
        if self.r <= 0.0 {
            return Err(KalmanError::InvalidModel("R must be positive"));
        }
        let scale = self.q.abs().max().max(f64::MIN_POSITIVE);
        if (self.q - self.q.transpose()).abs().max() > 1e-12 * scale {
            return Err(KalmanError::InvalidModel("Q must be symmetric"));
        }
        let min_eig = DMatrix::from_iterator(D, D, self.q.iter().copied()).symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return Err(KalmanError::InvalidModel("Q must be positive semidefinite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState<const D: usize> {
    pub xhat: SVector<f64, D>,
    pub p: SMatrix<f64, D, D>,
    /// Gain used by the most recent update.
    pub k: SVector<f64, D>,
}

impl<const D: usize> KalmanState<D> {
    pub fn new(xhat: SVector<f64, D>, p: SMatrix<f64, D, D>) -> Self {
        KalmanState { xhat, p, k: SVector::zeros() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceUpdate {
    /// `P = (I − K·H)·P⁻`, re-symmetrized.
    #[default]
    Standard,
    /// `P = (I − K·H)·P⁻·(I − K·H)ᵀ + K·R·Kᵀ`.
    Joseph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// Full Riccati recursion every step.
    #[default]
    TimeVarying,
    /// Precompute the converged gain and hold it fixed.
    SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KalmanOptions {
    pub covariance: CovarianceUpdate,
    pub gain: GainMode,
}

fn symmetrize<const D: usize>(p: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (p + p.transpose()) * 0.5
}

/// Time update: `x̂⁻ = Ad·x̂ + Bd·u`, `P⁻ = Ad·P·Adᵀ + Q`.
pub fn kf_predict<const D: usize>(m: &DiscreteLinearModel<D>, ks: &KalmanState<D>, u: f64) -> KalmanState<D> {
    KalmanState {
        xhat: m.ad * ks.xhat + m.bd * u,
        p: symmetrize(&(m.ad * ks.p * m.ad.transpose() + m.q)),
        k: ks.k,
    }
}

/// Measurement update of a predicted state with measurement `y`.
pub fn kf_update<const D: usize>(
    m: &DiscreteLinearModel<D>,
    prior: &KalmanState<D>,
    y: f64,
    update: CovarianceUpdate,
) -> Result<KalmanState<D>, KalmanError> {
    let ph = prior.p * m.h;
    let s = m.h.dot(&ph) + m.r;
    if !(s > 0.0) {
        return Err(KalmanError::InnovationNotPositive(s));
    }
    let k = ph / s;
    let innovation = y - m.h.dot(&prior.xhat);
    let xhat = prior.xhat + k * innovation;
    let ikh = SMatrix::<f64, D, D>::identity() - k * m.h.transpose();
    let p = match update {
        CovarianceUpdate::Standard => ikh * prior.p,
        CovarianceUpdate::Joseph => ikh * prior.p * ikh.transpose() + k * k.transpose() * m.r,
    };
    let out = KalmanState { xhat, p: symmetrize(&p), k };
    if out.xhat.iter().chain(out.p.iter()).all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(KalmanError::NonFinite("filter state"))
    }
}

/// Predict with command `u`, then correct with measurement `y`.
pub fn kf_step<const D: usize>(
    m: &DiscreteLinearModel<D>,
    ks: &KalmanState<D>,
    u: f64,
    y: f64,
) -> Result<KalmanState<D>, KalmanError> {
    kf_update(m, &kf_predict(m, ks, u), y, CovarianceUpdate::Standard)
}

/// Converged gain and a-priori covariance of the Riccati recursion.
pub fn steady_state_gain<const D: usize>(
    m: &DiscreteLinearModel<D>,
    max_iter: usize,
) -> Result<(SVector<f64, D>, SMatrix<f64, D, D>), KalmanError> {
    let mut ks = KalmanState::new(SVector::zeros(), m.q);
    let mut prev = SVector::<f64, D>::zeros();
    for i in 0..max_iter {
        let prior = kf_predict(m, &ks, 0.0);
        ks = kf_update(m, &prior, 0.0, CovarianceUpdate::Joseph)?;
        let change = (ks.k - prev).norm();
        if i > 0 && change <= 1e-13 * ks.k.norm() {
            return Ok((ks.k, prior.p));
        }
        prev = ks.k;
    }
    Err(KalmanError::RiccatiNotConverged(max_iter))
}

/// Run the filter over aligned command and measurement sequences.
///
/// The first sample is a pure measurement update of `(x0, P0)`; every later
/// sample predicts with the previous command before correcting. Returns the
/// a-posteriori estimates.
pub fn kf_filter<const D: usize>(
    m: &DiscreteLinearModel<D>,
    inputs: &[f64],
    measurements: &[f64],
    x0: SVector<f64, D>,
    p0: SMatrix<f64, D, D>,
    options: KalmanOptions,
) -> Result<Vec<SVector<f64, D>>, KalmanError> {
    if inputs.len() != measurements.len() {
        return Err(KalmanError::Misaligned);
    }
    m.validate()?;
    let mut out = Vec::with_capacity(inputs.len());
    match options.gain {
        GainMode::TimeVarying => {
            let mut ks = KalmanState::new(x0, p0);
            for (i, &y) in measurements.iter().enumerate() {
                let prior = if i == 0 { ks.clone() } else { kf_predict(m, &ks, inputs[i - 1]) };
                ks = kf_update(m, &prior, y, options.covariance)
                    .map_err(|e| KalmanError::At { time: i as f64, source: Box::new(e) })?;
                out.push(ks.xhat);
            }
        }
        GainMode::SteadyState => {
            let (k, _) = steady_state_gain(m, 10_000_000)?;
            let mut x = x0;
            for (i, &y) in measurements.iter().enumerate() {
                if i > 0 {
                    x = m.ad * x + m.bd * inputs[i - 1];
                }
                x += k * (y - m.h.dot(&x));
                out.push(x);
            }
        }
    }
    Ok(out)
}

/// Kalman model for the linear nominal plant, measuring displacement only.
///
/// Process noise enters through the command channel: `Q = q·Bd·Bdᵀ` with
/// `q = R·q_over_r`, so `q` carries the same units (m²) as `R`.
pub fn servo_kalman_model(
    lm: &LinearModel,
    dt: f64,
    r: f64,
    q_over_r: f64,
) -> Result<DiscreteLinearModel<4>, KalmanError> {
    if !(q_over_r >= 0.0 && q_over_r.is_finite()) {
        return Err(KalmanError::InvalidModel("Q/R must be finite and >= 0"));
    }
    let (ad, bd) = discretize_zoh(&lm.a, &lm.b, dt)?;
    let model = DiscreteLinearModel {
        ad,
        bd,
        h: lm.c.row(0).transpose(),
        q: bd * bd.transpose() * (r * q_over_r),
        r,
    };
    model.validate()?;
    Ok(model)
}

/// Displacement, velocity and acceleration estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanEstimates {
    pub disp: TimeSeries,
    pub vel: TimeSeries,
    pub acc: TimeSeries,
}

/// Filter the noisy displacement of the servo plant and map the state
/// estimates through the output rows of `lm`.
pub fn kf_run(
    m: &DiscreteLinearModel<4>,
    lm: &LinearModel,
    input: &TimeSeries,
    yd: &TimeSeries,
    x0: SVector<f64, 4>,
    p0: SMatrix<f64, 4, 4>,
    options: KalmanOptions,
) -> Result<KalmanEstimates, KalmanError> {
    if input.len() != yd.len() || input.dt() != yd.dt() {
        return Err(KalmanError::Misaligned);
    }
    let states = kf_filter(m, input.values(), yd.values(), x0, p0, options).map_err(|e| match e {
        KalmanError::At { time, source } => KalmanError::At { time: input.time(time as usize), source },
        other => other,
    })?;
    let row = |r: usize| -> TimeSeries {
        let c = lm.c.row(r);
        let values = states.iter().map(|x| (c * x)[0]).collect();
        input.with_values(values).expect("finite estimates")
    };
    Ok(KalmanEstimates { disp: row(0), vel: row(1), acc: row(2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Vector1};

    fn scalar_model(q: f64, r: f64) -> DiscreteLinearModel<1> {
        DiscreteLinearModel {
            ad: Matrix1::new(1.0),
            bd: Vector1::new(0.0),
            h: Vector1::new(1.0),
            q: Matrix1::new(q),
            r,
        }
    }

    #[test]
    fn zoh_of_zero_matrix() {
        let a = SMatrix::<f64, 2, 2>::zeros();
        let b = SVector::<f64, 2>::new(1.0, -2.0);
        let (ad, bd) = discretize_zoh(&a, &b, 0.25).unwrap();
        assert_eq!(ad, SMatrix::<f64, 2, 2>::identity());
        assert!((bd - b * 0.25).abs().max() < 1e-16);
    }

    #[test]
    fn zoh_scalar_closed_form() {
        let (a, b, dt) = (-3.0, 2.0, 0.1);
        let (ad, bd) = discretize_zoh(&Matrix1::new(a), &Vector1::new(b), dt).unwrap();
        assert!((ad[0] - (a * dt).exp()).abs() < 1e-15);
        assert!((bd[0] - ((a * dt).exp() - 1.0) / a * b).abs() < 1e-15);
    }

    #[test]
    fn zoh_matches_inverse_formula_for_invertible_a() {
        let lm = LinearModel::identified();
        let dt = 1.0 / 1024.0;
        let (ad, bd) = discretize_zoh(&lm.a, &lm.b, dt).unwrap();
        let a_inv = lm.a.try_inverse().unwrap();
        let bd_alt = a_inv * (ad - SMatrix::<f64, 4, 4>::identity()) * lm.b;
        // Compare through the displacement output, where both are well scaled.
        let c = lm.c.row(0);
        let lhs = (c * bd)[0];
        let rhs = (c * bd_alt)[0];
        assert!(((lhs - rhs) / lhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn zoh_spectral_radius_tracks_continuous_poles() {
        let lm = LinearModel::identified();
        let dt = 1.0 / 1024.0;
        let (ad, _) = discretize_zoh(&lm.a, &lm.b, dt).unwrap();
        let rho = ad.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let max_re = lm.a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!((rho - (max_re * dt).exp()).abs() < 1e-9, "rho {rho}, re {max_re}");
        // The rounded identified constants leave one lightly unstable pole pair.
        assert!((max_re - 0.003651848031876792).abs() < 1e-6);
    }

    #[test]
    fn scalar_riccati_recursion() {
        let m = scalar_model(0.0, 1.0);
        let mut ks = KalmanState::new(Vector1::new(0.0), Matrix1::new(1.0));
        for k in 1..=50 {
            ks = kf_step(&m, &ks, 0.0, (k as f64).sin()).unwrap();
            assert!((ks.p[0] - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn huge_r_means_pure_prediction() {
        let mut m = scalar_model(0.1, 1e18);
        m.ad = Matrix1::new(0.9);
        m.bd = Vector1::new(1.0);
        let ks = KalmanState::new(Vector1::new(2.0), Matrix1::new(1.0));
        let next = kf_step(&m, &ks, 0.5, 1000.0).unwrap();
        assert!(next.k[0].abs() < 1e-17);
        assert!((next.xhat[0] - (0.9 * 2.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_prediction() {
        let mut m = scalar_model(0.1, 0.5);
        m.ad = Matrix1::new(0.8);
        let ks = KalmanState::new(Vector1::new(3.0), Matrix1::new(1.0));
        let predicted = 0.8 * 3.0;
        let next = kf_step(&m, &ks, 0.0, predicted).unwrap();
        assert_eq!(next.xhat[0], predicted);
    }

    #[test]
    fn non_positive_innovation_rejected() {
        let m = DiscreteLinearModel { r: -1.0, ..scalar_model(0.0, 1.0) };
        let ks = KalmanState::new(Vector1::new(0.0), Matrix1::new(0.0));
        assert!(matches!(kf_step(&m, &ks, 0.0, 0.0), Err(KalmanError::InnovationNotPositive(_))));
        assert!(m.validate().is_err());
    }

    #[test]
    fn joseph_and_standard_agree_for_optimal_gain() {
        let lm = LinearModel::identified();
        let m = servo_kalman_model(&lm, 1.0 / 1024.0, 1e-6, 0.01).unwrap();
        let mut a = KalmanState::new(SVector::zeros(), SMatrix::zeros());
        let mut b = a.clone();
        for i in 0..2000 {
            let u = 0.01 * (i as f64 * 0.05).sin();
            let y = 0.009 * (i as f64 * 0.05 - 0.1).sin();
            a = kf_update(&m, &kf_predict(&m, &a, u), y, CovarianceUpdate::Standard).unwrap();
            b = kf_update(&m, &kf_predict(&m, &b, u), y, CovarianceUpdate::Joseph).unwrap();
        }
        let da = m.h.dot(&a.xhat);
        let db = m.h.dot(&b.xhat);
        assert!((da - db).abs() < 1e-9, "{da} vs {db}");
    }

    #[test]
    fn steady_state_gain_matches_time_varying_limit() {
        let mut m = scalar_model(0.01, 1.0);
        m.ad = Matrix1::new(0.95);
        let (k, _) = steady_state_gain(&m, 100_000).unwrap();
        let mut ks = KalmanState::new(Vector1::new(0.0), Matrix1::new(1.0));
        for _ in 0..2000 {
            ks = kf_step(&m, &ks, 0.0, 0.0).unwrap();
        }
        assert!((ks.k[0] - k[0]).abs() < 1e-12);
    }

    #[test]
    fn servo_model_structure() {
        let lm = LinearModel::identified();
        let m = servo_kalman_model(&lm, 1.0 / 1024.0, 1.07e-6, 0.01).unwrap();
        assert_eq!(m.r, 1.07e-6);
        assert_eq!(m.h, lm.c.row(0).transpose());
        let expected_q = m.bd * m.bd.transpose() * (1.07e-6 * 0.01);
        assert_eq!(m.q, expected_q);
        assert!(servo_kalman_model(&lm, 1.0 / 1024.0, 1.07e-6, -1.0).is_err());
    }
}
