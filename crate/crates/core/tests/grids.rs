use proptest::prelude::*;
use scatterlab::grids::*;

const K: f64 = 379_687.5;

#[test]
fn max_binary_angmom_examples() {
    assert!((max_binary_angmom(-30.0, K).unwrap() - 6328.125f64.sqrt()).abs() < 1e-12);
    assert!((max_binary_angmom(-30.0, K).unwrap() - 79.55).abs() < 5e-3);
    let l = 75.0 * 1.5f64.sqrt();
    assert!((max_binary_angmom(-22.5, K).unwrap() - l).abs() < 1e-10);
    let a = max_binary_angmom(-40.0, K).unwrap();
    let b = max_binary_angmom(-160.0, K).unwrap();
    assert!((a - 2.0 * b).abs() < 1e-12);
    assert!(max_binary_angmom(0.0, K).is_err());
    assert!(max_binary_angmom(5.0, K).is_err());
}

#[test]
fn chebyshev_boundary_n2() {
    let b = chebyshev_boundary(1.0, 2);
    let h = 0.5f64.sqrt();
    let want = [(1.0, 0.0), (h, h), (-h, h), (-1.0, 0.0)];
    assert_eq!(b.len(), want.len());
    for (p, q) in b.iter().zip(want) {
        assert!((p.0 - q.0).abs() < 1e-15 && (p.1 - q.1).abs() < 1e-15, "{p:?}");
    }
}

#[test]
fn chebyshev_grid_rules() {
    assert!(chebyshev_disk_grid(1.0, 3).is_err());
    assert!(chebyshev_disk_grid(1.0, 0).is_err());
    for n in [2, 4, 12, 28] {
        let g = chebyshev_disk_grid(50.0, n).unwrap();
        assert!(g.points.iter().all(|p| p.0.hypot(p.1) <= 50.0 * (1.0 + 1e-12) && p.1 >= 0.0));
        for b in chebyshev_boundary(50.0, n) {
            assert!(g.points.iter().any(|p| (p.0 - b.0).abs() < 1e-12 && (p.1 - b.1).abs() < 1e-12));
        }
    }
    // N = 2: x in {-1, -h, h, 1}, y in {0, h}; every row-0 node plus the two upper corners
    assert_eq!(chebyshev_disk_grid(1.0, 2).unwrap().points.len(), 6);
}

#[test]
fn measurement_grid_counts() {
    for (n, count) in [(4, 41), (8, 59), (12, 85), (16, 119), (28, 269)] {
        let g = measurement_disk_grid(10.0, n).unwrap();
        assert_eq!(g.points.len(), count, "N = {n}");
        assert_eq!(g, measurement_disk_grid(10.0, n).unwrap());
    }
}

#[test]
fn uniform_grid_examples() {
    let g = uniform_disk_grid(0.0, 0.3).unwrap();
    assert_eq!(g.points, vec![(0.0, 0.0)]);
    let g = uniform_disk_grid(2.0, 2.0).unwrap();
    let mut pts = g.points.clone();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(pts, vec![(-2.0, 0.0), (0.0, -2.0), (0.0, 0.0), (0.0, 2.0), (2.0, 0.0)]);
    let g = uniform_disk_grid(4.0, 0.1 * 10.0).unwrap();
    assert!(g.points.iter().all(|p| p.0.hypot(p.1) <= 4.0 + 1e-12));
    assert!(uniform_disk_grid(1.0, 0.0).is_err());
}

#[test]
fn allowed_region_examples() {
    assert!(allowed_region(-30.0, 70.0, K, -27.0));
    assert!(!allowed_region(-30.0, 80.0, K, -27.0));
    assert!(!allowed_region(-20.0, 1.0, K, -27.0));
}

#[test]
fn bivariate_grid_examples() {
    let g = bivariate_grid();
    let has = |e: f64, l: f64, tol: f64| g.iter().any(|p| (p.0 - e).abs() < 1e-9 && (p.1 - l).abs() < tol);
    assert!(has(-30.0, 70.0, 1e-12));
    let lm = max_binary_angmom(-150.0, K).unwrap();
    assert!((lm - 35.57).abs() < 1e-2);
    assert!(has(-150.0, lm, 1e-9));
    assert!(!has(-150.0, 40.0, 1e-9));
    assert!(g.iter().all(|p| allowed_region_with_slack(p.0, p.1, K, -27.0, 1e-12)));
    let energies: std::collections::BTreeSet<i64> = g.iter().map(|p| (p.0 * 1e6).round() as i64).collect();
    assert_eq!(energies.len(), 100);
    let expected: usize = (0..100)
        .map(|i| {
            let e = -150.0 + 120.0 * i as f64 / 99.0;
            let lm = (K / (-2.0 * e)).sqrt();
            1 + BIVARIATE_L_B.iter().filter(|&&l| l <= lm).count()
        })
        .sum();
    assert_eq!(g.len(), expected);
}

#[test]
fn trivariate_levels() {
    let v = trivariate_energy_levels();
    assert_eq!(v.len(), 21);
    assert_eq!(v[0], -30.0);
    assert_eq!(*v.last().unwrap(), -300.0);
    assert!(v.contains(&-160.0) && v.contains(&-180.0) && !v.contains(&-170.0));
    assert!(v.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn grid_measurement_example() {
    let m = GridMeasurement::from_counts(10, 4, 1).unwrap();
    assert!((m.estimate - 4.0 / 9.0).abs() < 1e-15);
    assert!((m.stderr - (4.0 / 9.0 * 5.0 / 9.0 / 9.0f64).sqrt()).abs() < 1e-15);
    assert_eq!(m.decided(), 9);
    assert!(GridMeasurement::from_counts(3, 0, 3).unwrap().estimate.is_nan());
    assert!(GridMeasurement::from_counts(3, 2, 2).is_err());
}

fn sample_grid() -> DiskGrid {
    measurement_disk_grid(60.0, 12).unwrap()
}

#[test]
fn interpolation_exact_at_nodes_and_constant() {
    let g = sample_grid();
    let vals: Vec<f64> = g.points.iter().map(|p| (0.1 * p.0).sin() + 0.01 * p.1).collect();
    let it = DiskInterpolant::new(&g, &vals, false).unwrap();
    for (p, v) in g.points.iter().zip(&vals) {
        assert!((it.eval(p.0, p.1).unwrap() - v).abs() < 1e-9);
    }
    let c = DiskInterpolant::new(&g, &vec![0.37; g.points.len()], true).unwrap();
    for (x, y) in [(0.0, 0.0), (10.0, -20.0), (-40.0, 30.0)] {
        assert!((c.eval(x, y).unwrap() - 0.37).abs() < 1e-12);
    }
    assert!(it.eval(70.0, 0.0).is_err());
    assert!(interpolate_disk(&g, &vals, 80.0, 10.0).is_err());
}

#[test]
fn clamped_interpolation_stays_in_unit_interval() {
    let g = sample_grid();
    let vals: Vec<f64> = g.points.iter().map(|p| p.0 / 30.0).collect();
    let it = DiskInterpolant::new(&g, &vals, true).unwrap();
    assert_eq!(it.eval(59.0, 1.0).unwrap(), 1.0);
    assert_eq!(it.eval(-59.0, 1.0).unwrap(), 0.0);
    assert!(it.eval_clamped(59.99, 1.0).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn interpolation_has_linear_precision(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -5.0f64..5.0,
        r in 0.0f64..0.95, th in 0.0f64..std::f64::consts::PI,
    ) {
        let g = sample_grid();
        let vals: Vec<f64> = g.points.iter().map(|p| a * p.0 + b * p.1 + c).collect();
        let (x, y) = (60.0 * r * th.cos(), 60.0 * r * th.sin());
        let v = interpolate_disk(&g, &vals, x, y).unwrap();
        prop_assert!((v - (a * x + b * y + c)).abs() < 1e-6);
    }

    #[test]
    fn negative_l_by_reads_the_mirror(r in 0.0f64..0.95, th in 0.0f64..std::f64::consts::PI) {
        let g = sample_grid();
        let vals: Vec<f64> = g.points.iter().map(|p| p.0 * p.1).collect();
        let (x, y) = (60.0 * r * th.cos(), 60.0 * r * th.sin());
        prop_assert_eq!(interpolate_disk(&g, &vals, x, y).unwrap(), interpolate_disk(&g, &vals, x, -y).unwrap());
    }
}
