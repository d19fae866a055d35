use proptest::prelude::*;
use singwave::assembly::{full_propagator, limit_propagator, reflection_matrix};
use singwave::coefficients::RegularizedEval;
use singwave::config::Scenario;
use singwave::integrator::IntegratorConfig as Cfg;
use singwave::oracle::direct_propagator;
use singwave::singular::e_sing;
use singwave::zones::choose_zone_constant;
use singwave::{Evaluator, FullPropagator, IntegratorConfig};

fn setup() -> (Evaluator, singwave::ZoneConstant, IntegratorConfig) {
    let ev = Evaluator::standard();
    let zc = choose_zone_constant(&ev);
    (ev, zc, IntegratorConfig::with_tol(1e-11))
}

#[test]
fn f32_instantiation() {
    let ev = RegularizedEval::<f32>::standard();
    let zc = choose_zone_constant(&ev);
    let cfg = Cfg::<f32>::with_tol(1e-5);
    let p = full_propagator(&ev, 0.5, 1.5, 30.0, 0.02, &zc, &cfg).unwrap();
    let (d, _) = direct_propagator(&ev, 0.5f32, 1.5, 30.0, 0.02, &cfg).unwrap();
    assert!((p.matrix - d).norm() < 1e-3, "{}", (p.matrix - d).norm());
}

#[test]
fn every_preset_assembles() {
    let cfg = IntegratorConfig::with_tol(1e-10);
    for name in singwave::config::PRESETS {
        let ev = Scenario::preset(name).unwrap().evaluator::<f64>().unwrap();
        let zc = choose_zone_constant(&ev);
        let p: FullPropagator = full_propagator(&ev, 0.25, 1.75, 60.0, 0.01, &zc, &cfg).unwrap();
        let (d, _) = direct_propagator(&ev, 0.25, 1.75, 60.0, 0.01, &cfg).unwrap();
        assert!((p.matrix - d).norm() < 1e-6, "{name}");
    }
}

#[test]
fn limit_with_no_jump_is_free_rotation_product() {
    let ev = Scenario::preset("no-jump").unwrap().evaluator::<f64>().unwrap();
    let cfg = IntegratorConfig::with_tol(1e-11);
    let m = limit_propagator(&ev.coeff, 0.5, 1.5, 10.0, &cfg).unwrap();
    // b ≡ const: E = exp(i|ξ|(t2-t1) σ_x)
    let (c, s) = (10.0f64.cos(), 10.0f64.sin());
    let want = [c, 0.0, 0.0, s, 0.0, s, c, 0.0];
    let got = [m.a11.re, m.a11.im, m.a12.re, m.a12.im, m.a21.re, m.a21.im, m.a22.re, m.a22.im];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-8);
    }
}

#[test]
fn reflection_matrix_rejects_nonpositive_h() {
    assert!(reflection_matrix(0.0).is_err());
    assert!(reflection_matrix(-1.0).is_err());
    let r = reflection_matrix(1.0).unwrap();
    assert!((r.a12.norm() + r.a21.norm()) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // det E = exp(-∫ b'/b) = b_ε(t1)/b_ε(t2)
    #[test]
    fn determinant_matches_coefficient_ratio(t1 in 0.0f64..0.99, len in 0.02f64..1.0, xi in 0.0f64..80.0, eps in 0.005f64..0.2) {
        let (ev, zc, cfg) = setup();
        let t2 = (t1 + len).min(2.0);
        let p = full_propagator(&ev, t1, t2, xi, eps, &zc, &cfg).unwrap();
        let want = ev.b_eps(t1, eps) / ev.b_eps(t2, eps);
        prop_assert!((p.matrix.det().re - want).abs() < 1e-7 && p.matrix.det().im.abs() < 1e-7);
    }

    #[test]
    fn path_tiles_the_interval(t1 in 0.0f64..1.5, len in 0.01f64..0.5, xi in 0.0f64..500.0, eps in 0.001f64..0.3) {
        let (ev, zc, cfg) = setup();
        let t2 = (t1 + len).min(2.0);
        let p = full_propagator(&ev, t1, t2, xi, eps, &zc, &cfg).unwrap();
        prop_assert_eq!(p.path.first().unwrap().from, t1);
        prop_assert_eq!(p.path.last().unwrap().to, t2);
        prop_assert!(p.path.windows(2).all(|w| w[0].to == w[1].from));
    }

    #[test]
    fn singular_flow(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, lambda in 0.0f64..2.0) {
        let (ev, _, _) = setup();
        let eps = 0.01;
        let ab = e_sing(&ev, b, a, lambda, eps, 1e-12).unwrap().matrix;
        let bc = e_sing(&ev, c, b, lambda, eps, 1e-12).unwrap().matrix;
        let ac = e_sing(&ev, c, a, lambda, eps, 1e-12).unwrap().matrix;
        prop_assert!((bc * ab - ac).norm() < 1e-9);
    }
}
