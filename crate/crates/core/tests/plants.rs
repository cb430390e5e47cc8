use hydrapf::integrate::rk5_step;
use hydrapf::model::eval_h_partials;
use hydrapf::{
    canonical_coefficients, chirp, nrmse, simulate_actual, simulate_linear, simulate_nominal, sinusoid,
    LinearModel, PlantState, SpecimenKind, SpecimenParams, TimeSeries, TransferSystemParams,
};
use nalgebra::{Matrix4, Vector4};

fn table6_chirp() -> TimeSeries {
    chirp(0.1, 20.0, 0.0234, 30.0, 1024.0).unwrap()
}

fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let energy: f64 = b.iter().map(|y| y * y).sum();
    (err / energy).sqrt()
}

#[test]
fn substeps_converge() {
    let u = table6_chirp();
    let tp = TransferSystemParams::default();
    let one = simulate_actual(&SpecimenParams::ACTUAL, &tp, &u, 1).unwrap();
    let two = simulate_actual(&SpecimenParams::ACTUAL, &tp, &u, 2).unwrap();
    let e = rel_rms(one.disp().values(), two.disp().values());
    assert!(e < 1e-5, "relative RMS {e}");
}

#[test]
fn linear_limit_matches_constant_coefficient_ode() {
    let sp = SpecimenParams { k_n: 0.0, ..SpecimenParams::ACTUAL };
    let tp = TransferSystemParams::default();
    let u = table6_chirp();
    let traj = simulate_actual(&sp, &tp, &u, 1).unwrap();

    // With k_n = 0 every coefficient is constant and F = m·a + c·v + k·x.
    let c = canonical_coefficients(SpecimenKind::Arctan, &sp, &tp, &PlantState::ZERO).unwrap();
    let d = eval_h_partials(SpecimenKind::Arctan, &sp, 0.0, 0.0).unwrap();
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        c.c1 + c.c5 * sp.k, c.c2 + c.c5 * sp.c, c.c3 + c.c5 * sp.m + d.dx, c.c4 + d.dv,
    );
    let bvec = Vector4::new(0.0, 0.0, 0.0, tp.b);
    let mut s = Vector4::zeros();
    let mut disp = Vec::with_capacity(u.len());
    for &uk in u.values() {
        disp.push(s[0]);
        let f = |_: f64, y: &Vector4<f64>| a * y + bvec * uk;
        s = rk5_step(&f, &s, 0.0, u.dt()).unwrap();
    }
    let e = rel_rms(traj.disp().values(), &disp);
    assert!(e < 1e-6, "relative RMS {e}");
}

#[test]
fn linear_nominal_error_grows_with_frequency() {
    let tp = TransferSystemParams::default();
    let lm = LinearModel::identified();
    let mut linear = Vec::new();
    let mut nonlinear = Vec::new();
    for f in [1.0, 8.0, 14.0, 19.0] {
        let u = sinusoid(f, 0.025, 5.0, 1024.0).unwrap();
        let truth = simulate_actual(&SpecimenParams::ACTUAL, &tp, &u, 1).unwrap().disp();
        let nom = simulate_nominal(&SpecimenParams::NOMINAL, &tp, &u, 1).unwrap().disp();
        let lin = simulate_linear(&lm, &u).unwrap().disp;
        linear.push(nrmse(&lin, &truth).unwrap());
        nonlinear.push(nrmse(&nom, &truth).unwrap());
    }
    assert!(linear.windows(2).all(|w| w[0] < w[1]), "{linear:?}");
    for i in 1..4 {
        assert!(linear[i] > nonlinear[i], "{linear:?} vs {nonlinear:?}");
    }
    assert!((12.0..=30.0).contains(&linear[3]), "19 Hz linear NRMSE {}", linear[3]);
}
