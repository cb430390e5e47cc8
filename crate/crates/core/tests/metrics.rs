use hydrapf::metrics::{error_energy, nrmse_slice};
use hydrapf::{interval_nrmse, nrmse, IntervalSpec, TimeSeries};
use proptest::prelude::*;

fn series(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(0.0, 0.25, values).unwrap()
}

fn paired(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0f64..10.0, len), prop::collection::vec(-10.0f64..10.0, len))
}

proptest! {
    #[test]
    fn scale_consistent((est, truth) in paired(64), alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let base = nrmse_slice(&est, &truth).unwrap();
        let e2: Vec<f64> = est.iter().map(|v| alpha * v).collect();
        let t2: Vec<f64> = truth.iter().map(|v| alpha * v).collect();
        let scaled = nrmse_slice(&e2, &t2).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn triangle_bound((a, x) in paired(48), y in prop::collection::vec(-10.0f64..10.0, 48)) {
        let norm = |v: &[f64]| v.iter().map(|s| s * s).sum::<f64>().sqrt();
        let lhs = nrmse_slice(&a, &x).unwrap();
        let rhs = nrmse_slice(&a, &y).unwrap() * norm(&y) / norm(&x) + nrmse_slice(&y, &x).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn interval_errors_recombine((est, truth) in paired(121)) {
        // 0.25 s spacing: 121 samples cover [0, 30].
        let spec = IntervalSpec::default();
        let (e, t) = (series(est.clone()), series(truth.clone()));
        let mut parts = 0.0;
        for (start, end) in spec.intervals() {
            let r = IntervalSpec::index_range(&t, start, end);
            parts += error_energy(&est[r.clone()], &truth[r]).unwrap().0;
        }
        let covered = IntervalSpec::index_range(&t, 0.0, 30.0);
        let total = error_energy(&est[covered.clone()], &truth[covered]).unwrap().0;
        prop_assert!((parts - total).abs() <= 1e-10 * total.max(1.0));
        prop_assert_eq!(interval_nrmse(&e, &t, &spec).unwrap().len(), 3);
    }
}

#[test]
fn whole_series_matches_slice() {
    let t = series((0..20).map(|i| i as f64 - 9.5).collect());
    let e = series((0..20).map(|i| i as f64 - 9.0).collect());
    assert_eq!(nrmse(&e, &t).unwrap(), nrmse_slice(e.values(), t.values()).unwrap());
}
