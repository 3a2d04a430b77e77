use gflame_core::orbit::{
    closure_residual, closure_residual_after, negative_orbit, shoot_ballistic, shoot_ballistic_abc,
    shoot_ballistic_kolmogorov, verify_symmetry_composition, ShootingConfig,
};
use gflame_core::flow::TWO_PI;
use gflame_core::FlowKind;

#[test]
fn abc_orbit_constants() {
    let c = shoot_ballistic_abc().unwrap();
    assert!(c.shooting_parameter > 0.341 && c.shooting_parameter < 0.342, "{}", c.shooting_parameter);
    assert!((c.axis_offset - c.shooting_parameter).abs() < 1e-4);
    assert!((c.period - 3.235).abs() < 0.01, "{}", c.period);
    assert_eq!(c.direction, 1);
    assert!((c.mean_speed() - TWO_PI / c.period).abs() < 1e-15);
}

#[test]
fn kolmogorov_orbit_constants() {
    let c = shoot_ballistic_kolmogorov().unwrap();
    assert!(c.shooting_parameter > 0.029 && c.shooting_parameter < 0.03, "{}", c.shooting_parameter);
    assert!((c.axis_offset - 0.602).abs() < 0.005, "{}", c.axis_offset);
    assert!((c.period - 15.156).abs() < 0.05, "{}", c.period);
    // the quarter crossing sits a quarter period in
    assert!((4.0 * c.quarter_time - c.period).abs() < 1e-6);
}

#[test]
fn certificates_close_under_tighter_tolerance() {
    for kind in FlowKind::ALL {
        let cfg = ShootingConfig::for_flow(kind);
        let pos = shoot_ballistic(kind, &cfg).unwrap();
        let neg = negative_orbit(&pos, &cfg).unwrap();
        assert!((neg.displacement.x + TWO_PI).abs() < 1e-15);
        assert!((neg.period - pos.period).abs() < 1e-8);
        let tight = cfg.integrator.tightened(10.0);
        for cert in [&pos, &neg] {
            let r = closure_residual(cert, &tight).unwrap();
            assert!(r < 1e-5, "{kind} dir {}: {r:e}", cert.direction);
        }
        // errors stay small over several periods
        assert!(closure_residual_after(&pos, 3, &tight).unwrap() < 1e-5);
    }
}

#[test]
fn symmetry_composition_holds_for_both_directions() {
    for kind in FlowKind::ALL {
        let cfg = ShootingConfig::for_flow(kind);
        let pos = shoot_ballistic(kind, &cfg).unwrap();
        let neg = negative_orbit(&pos, &cfg).unwrap();
        for cert in [&pos, &neg] {
            let report = verify_symmetry_composition(cert, &cfg.integrator, 1e-7).unwrap();
            assert!(report.all_passed(), "{report:#?}");
            assert!(report.check("full-period closure").is_some());
        }
    }
}

#[test]
fn shooting_is_deterministic() {
    let a = shoot_ballistic_abc().unwrap();
    let b = shoot_ballistic_abc().unwrap();
    assert_eq!(a, b);
}
