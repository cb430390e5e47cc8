use hydrapf::{integrate_fixed, rk5_step};
use nalgebra::{Matrix3, SVector, Vector1, Vector3};
use proptest::prelude::*;

fn exp_error(steps: usize) -> f64 {
    let f = |_: f64, y: &Vector1<f64>| *y;
    let h = 1.0 / steps as f64;
    let y = integrate_fixed(&f, &Vector1::new(1.0), 0.0, 1.0, h).unwrap();
    (y.last().unwrap()[0] - 1f64.exp()).abs()
}

#[test]
fn fifth_order_convergence() {
    let errors: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| exp_error(n)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((4.7..=5.3).contains(&order), "order {order} from {errors:?}");
    }
}

#[test]
fn nonautonomous_field_converges() {
    // y' = cos(t)·y, y(0) = 1 → y = exp(sin t).
    let f = |t: f64, y: &Vector1<f64>| *y * t.cos();
    let err = |n: usize| {
        let y = integrate_fixed(&f, &Vector1::new(1.0), 0.0, 2.0, 2.0 / n as f64).unwrap();
        (y.last().unwrap()[0] - 2f64.sin().exp()).abs()
    };
    let order = (err(16) / err(32)).log2();
    assert!((4.7..=5.3).contains(&order), "order {order}");
}

const A: Matrix3<f64> = Matrix3::new(-1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.0, 0.3, -4.0);

proptest! {
    #[test]
    fn linear_field_commutes_with_scaling(
        s in prop::array::uniform3(-10.0f64..10.0),
        alpha in -100.0f64..100.0,
    ) {
        let f = |_: f64, y: &Vector3<f64>| A * y;
        let s = Vector3::from(s);
        let a = rk5_step(&f, &(s * alpha), 0.0, 0.01).unwrap();
        let b = rk5_step(&f, &s, 0.0, 0.01).unwrap() * alpha;
        let scale = b.amax().max(1e-300);
        prop_assert!((a - b).amax() <= 1e-14 * scale);
    }

    #[test]
    fn steps_are_deterministic(s in prop::array::uniform2(-1.0f64..1.0), h in 1e-4f64..0.1) {
        let f = |t: f64, y: &SVector<f64, 2>| SVector::<f64, 2>::new(y[1], -y[0].sin() + t.cos());
        let s = SVector::<f64, 2>::from(s);
        prop_assert_eq!(rk5_step(&f, &s, 0.3, h).unwrap(), rk5_step(&f, &s, 0.3, h).unwrap());
    }
}
