use std::f64::consts::PI;

use proptest::prelude::*;
use scatterlab::kepler::*;

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[test]
fn elliptic_solver_residual_grid() {
    for i in 0..100 {
        let e = 0.999 * i as f64 / 99.0;
        for j in 0..100 {
            let m = 2.0 * PI * j as f64 / 100.0;
            let ea: f64 = solve_kepler_elliptic(m, e).unwrap();
            assert!((ea - e * ea.sin() - m).abs() < 1e-12, "e = {e}, M = {m}");
        }
    }
}

#[test]
fn hyperbolic_solver_examples() {
    assert_eq!(solve_kepler_hyperbolic(0.0, 1.7).unwrap(), 0.0);
    let h: f64 = solve_kepler_hyperbolic(3.0, 1.5).unwrap();
    assert!((1.5 * h.sinh() - h - 3.0).abs() < 1e-12);
    let hp: f64 = solve_kepler_hyperbolic(2.0, 2.5).unwrap();
    let hm: f64 = solve_kepler_hyperbolic(-2.0, 2.5).unwrap();
    assert!((hp + hm).abs() < 1e-12);
}

fn check_roundtrip(el: &OrbitalElements<f64>) {
    let (r, v) = elements_to_cartesian(el).unwrap();
    let back = cartesian_to_elements(r, v, el.total_mass).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert_eq!(back.orbit_class, el.orbit_class);
    assert!(rel(back.specific_energy, el.specific_energy) < 1e-10);
    assert!((back.eccentricity - el.eccentricity).abs() < 1e-10 * el.eccentricity.max(1.0));
    assert!((back.inclination - el.inclination).abs() < 1e-9);
    assert!(angle_diff(back.node_longitude, el.node_longitude) < 1e-9);
    assert!(angle_diff(back.pericenter_argument, el.pericenter_argument) < 1e-8);
    match el.orbit_class {
        OrbitClass::Elliptic => assert!(angle_diff(back.mean_anomaly, el.mean_anomaly) < 1e-8),
        OrbitClass::Hyperbolic => assert!(rel(back.mean_anomaly, el.mean_anomaly) < 1e-8 || (back.mean_anomaly - el.mean_anomaly).abs() < 1e-9),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn elliptic_roundtrip(
        a in 0.1f64..100.0,
        e in 0.01f64..0.999,
        i in 0.05f64..3.09,
        node in 0.0f64..6.28,
        psi in 0.0f64..6.28,
        m in 0.0f64..6.28,
        mass in 1.0f64..100.0,
    ) {
        check_roundtrip(&OrbitalElements::elliptic(a, e, i, node, psi, m, mass));
    }

    #[test]
    fn hyperbolic_roundtrip(
        energy in 0.01f64..50.0,
        e in 1.001f64..10.0,
        i in 0.05f64..3.09,
        node in 0.0f64..6.28,
        psi in 0.0f64..6.28,
        m in -20.0f64..20.0,
        mass in 1.0f64..100.0,
    ) {
        check_roundtrip(&OrbitalElements::hyperbolic(energy, e, i, node, psi, m, mass));
    }

    #[test]
    fn cartesian_reproduces_energy_and_angular_momentum(
        a in 0.5f64..50.0,
        e in 0.0f64..0.999,
        m in 0.0f64..6.28,
        i in 0.0f64..3.14,
    ) {
        let mass = 30.0;
        let el = OrbitalElements::elliptic(a, e, i, 0.3, 1.1, m, mass);
        let (r, v) = elements_to_cartesian(&el).unwrap();
        let energy = 0.5 * v.norm_sq() - mass / r.norm();
        let h = r.cross(v).norm();
        prop_assert!((energy - el.specific_energy).abs() < 1e-10 * el.specific_energy.abs());
        let h_exact = (mass * a * (1.0 - e * e)).sqrt();
        prop_assert!((h - h_exact).abs() < 1e-10 * h_exact.max(1e-3));
    }
}

#[test]
fn circular_input_reports_zero_eccentricity() {
    let el = OrbitalElements::elliptic(5.0, 0.0, 0.4, 0.2, 0.0, 1.3, 30.0);
    let (r, v) = elements_to_cartesian(&el).unwrap();
    let back = cartesian_to_elements(r, v, 30.0).unwrap();
    assert!(back.eccentricity < 1e-10);
}
