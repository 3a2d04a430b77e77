use gflame_core::bounds::{bound_lines, traced_period};
use gflame_core::flow::{sup_norms, TWO_PI};
use gflame_core::ode::{integrate, IntegratorConfig};
use gflame_core::orbit::{shoot_ballistic_abc, shoot_ballistic_kolmogorov, OrbitCertificate};
use gflame_core::{FlowField, FlowKind};

fn certs() -> Vec<OrbitCertificate> {
    vec![shoot_ballistic_abc().unwrap(), shoot_ballistic_kolmogorov().unwrap()]
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

#[test]
fn lines_match_reference_coefficients() {
    let expected = [[1.942, 0.793, 2.0, 1.0], [0.414, 0.239, 1.0, 1.0]];
    for (cert, want) in certs().iter().zip(expected) {
        let got = bound_lines(cert).coefficients().map(round3);
        assert_eq!(got, want, "{}", cert.flow_kind);
        let l = bound_lines(cert);
        assert!(l.lower_slope <= l.upper_slope);
        assert!(l.lower(0.0) < l.upper(0.0));
    }
}

#[test]
fn zero_intensity_traced_period_is_arc_length() {
    // at A = 0 the integrand is |V|, so τ′ is the length of one period of the orbit
    let cfg = IntegratorConfig::default();
    for cert in certs() {
        let traced = traced_period(&cert, 0.0, 512, &cfg).unwrap();
        let dense = IntegratorConfig { max_step: cert.period / 20_000.0, ..cfg };
        let path = integrate(&FlowField::unit(cert.flow_kind), cert.start, cert.period, &dense).unwrap();
        let chord = path.polyline_length();
        assert!((traced.period - chord).abs() < 1e-6 * chord, "{} {} vs {}", cert.flow_kind, traced.period, chord);
        assert!(traced.period <= traced.ceiling);
    }
}

#[test]
fn abc_intensity_four_respects_ceiling() {
    let cert = shoot_ballistic_abc().unwrap();
    let t = traced_period(&cert, 4.0, 256, &IntegratorConfig::default()).unwrap();
    let s6 = 6f64.sqrt();
    let ceiling = s6 * cert.period / (4.0 * s6 + 1.0);
    assert!((t.ceiling - ceiling).abs() < 1e-14);
    // period 3.235 gives 0.73385
    assert!((ceiling - 0.7338).abs() < 1e-3);
    assert!(t.period > 0.0 && t.period <= ceiling, "{}", t.period);
}

#[test]
fn traced_speed_dominates_lower_line() {
    let cfg = IntegratorConfig::default();
    for cert in certs() {
        let lines = bound_lines(&cert);
        let sup = sup_norms(cert.flow_kind).full;
        for a in [1.0, 4.0, 16.0] {
            let t = traced_period(&cert, a, 256, &cfg).unwrap();
            let bound = TWO_PI / cert.period * (a + 1.0 / sup);
            assert!((bound - lines.lower(a)).abs() < 1e-12);
            assert!(t.speed() >= bound, "{} A={a}: {} < {}", cert.flow_kind, t.speed(), bound);
        }
    }
}

#[test]
fn traced_period_decreases_with_intensity_and_converges() {
    let cfg = IntegratorConfig::default();
    for cert in certs() {
        let periods: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 16.0]
            .iter()
            .map(|&a| traced_period(&cert, a, 256, &cfg).unwrap().period)
            .collect();
        assert!(periods.windows(2).all(|w| w[1] < w[0]), "{periods:?}");
        let coarse = traced_period(&cert, 4.0, 256, &cfg).unwrap().period;
        let fine = traced_period(&cert, 4.0, 512, &cfg).unwrap().period;
        assert!((coarse - fine).abs() < 1e-8, "{}", (coarse - fine).abs());
    }
}

#[test]
fn kolmogorov_is_flow_kind_of_second_certificate() {
    assert_eq!(certs()[1].flow_kind, FlowKind::Kolmogorov);
}
