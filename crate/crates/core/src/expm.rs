//! Matrix exponential by balancing, scaling and squaring with a truncated
//! Taylor series.

use nalgebra::DMatrix;

use crate::kalman::KalmanError;

const MAX_TERMS: usize = 64;
const SERIES_TOL: f64 = 1e-17;
const TARGET_NORM: f64 = 0.5;

/// Diagonal power-of-two similarity that roughly equalizes row and column
/// norms. Returns the scaling vector `d` such that the balanced matrix is
/// `D⁻¹·M·D`.
fn balance(m: &mut DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut d = vec![1.0; n];
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = col + row;
            let (mut c, mut r) = (col, row);
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
    d
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(M)` for a square matrix.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>, KalmanError> {
    assert!(m.is_square(), "expm requires a square matrix");
    if m.iter().any(|v| !v.is_finite()) {
        return Err(KalmanError::NonFinite("matrix exponential input"));
    }
    let n = m.nrows();
    let mut work = m.clone();
    let d = balance(&mut work);

    let norm = one_norm(&work);
    let squarings = if norm > TARGET_NORM { (norm / TARGET_NORM).log2().ceil() as i32 } else { 0 };
    work /= 2f64.powi(squarings);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for k in 1..=MAX_TERMS {
        term = &term * &work / k as f64;
        sum += &term;
        if one_norm(&term) <= SERIES_TOL * one_norm(&sum) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KalmanError::ExpmNotConverged);
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    for i in 0..n {
        for j in 0..n {
            sum[(i, j)] *= d[i] / d[j];
        }
    }
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(KalmanError::ExpmNotConverged);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn scalar() {
        let m = DMatrix::from_element(1, 1, -3.7);
        assert!((expm(&m).unwrap()[(0, 0)] - (-3.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        let th = 2.3;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = expm(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!((e - expected).abs().max() < 1e-13);
    }

    #[test]
    fn nilpotent() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm(&m).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!((e - expected).abs().max() < 1e-15);
    }

    #[test]
    fn agrees_with_nalgebra() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[-1.2, 40.0, 0.3, -0.01, -2.0, 5.0, 0.7, -3.0, -0.5],
        );
        let ours = expm(&m).unwrap();
        let theirs = m.clone().exp();
        let scale = theirs.abs().max();
        assert!((ours - theirs).abs().max() < 1e-12 * scale);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(expm(&m).is_err());
    }
}
