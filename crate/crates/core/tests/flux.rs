use proptest::prelude::*;
use scatterlab::flux::*;
use scatterlab::grids::{max_binary_angmom, measurement_disk_grid, DiskGrid};

const K: f64 = 379_687.5;
const E: f64 = -27.0;

fn l_total() -> f64 {
    75.0 * 1.5f64.sqrt()
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(8).unwrap();
    for p in 0..16 {
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
        let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
        assert!((q - exact).abs() < 1e-13, "x^{p}: {q}");
    }
    assert!(gauss_legendre(0).is_err());
}

#[test]
fn flux_identity_on_grid() {
    let c = marginal_flux_constant(K, l_total());
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let eps = -150.0 + 120.0 * i as f64 / 19.0;
        let lmax = max_binary_angmom(eps, K).unwrap();
        for j in 1..=20 {
            let l = lmax * j as f64 / 20.5;
            let numeric = marginalize_flux_numeric(eps, l, K, l_total(), 128).unwrap();
            let closed = c * marginal_flux_density(eps, l, K, E).unwrap();
            worst = worst.max((numeric / closed - 1.0).abs());
        }
    }
    assert!(worst < 1e-3, "worst relative deviation {worst}");
}

#[test]
fn flux_numeric_small_l_and_convergence() {
    let a = marginalize_flux_numeric(-60.0, 1e-3, K, l_total(), 128).unwrap();
    let b = marginalize_flux_numeric(-60.0, 2e-3, K, l_total(), 128).unwrap();
    assert!(a.is_finite() && (b / a - 2.0).abs() < 1e-6);
    for l in [5.0, 30.0, 55.0] {
        let lo = marginalize_flux_numeric(-60.0, l, K, l_total(), 128).unwrap();
        let hi = marginalize_flux_numeric(-60.0, l, K, l_total(), 256).unwrap();
        assert!((lo / hi - 1.0).abs() < 1e-6);
    }
}

#[test]
fn full_flux_scalings() {
    let a = full_flux_density(-60.0, 20.0, 80.0, K).unwrap();
    let b = full_flux_density(-60.0, 20.0, 80.0, 2.0 * K).unwrap();
    assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    assert!(full_flux_density(10.0, 20.0, 80.0, K).is_err());
    assert!(marginal_flux_density(-30.0, 80.0, K, E).is_err());
}

/// Midpoint-rule area of a cell inside the allowed region.
fn brute_area(e0: f64, e1: f64, l0: f64, l1: f64) -> f64 {
    let n = 2000;
    let (de, dl) = ((e1 - e0) / n as f64, (l1 - l0) / n as f64);
    let mut hits = 0usize;
    for a in 0..n {
        let e = e0 + (a as f64 + 0.5) * de;
        let lmax = if e < 0.0 && e <= E { (K / (-2.0 * e)).sqrt() } else { -1.0 };
        for b in 0..n {
            if l0 + (b as f64 + 0.5) * dl <= lmax {
                hits += 1;
            }
        }
    }
    hits as f64 * de * dl
}

#[test]
fn cell_area_matches_brute_force() {
    for (e0, e1, l0, l1) in [
        (-150.0, -130.0, 20.0, 40.0),
        (-60.0, -30.0, 60.0, 80.0),
        (-40.0, -20.0, 10.0, 90.0),
        (-300.0, -200.0, 0.0, 10.0),
    ] {
        let exact = allowed_cell_area(e0, e1, l0, l1, K, E);
        let brute = brute_area(e0, e1, l0, l1);
        assert!((exact - brute).abs() < 2e-3 * (e1 - e0) * (l1 - l0), "{exact} vs {brute}");
    }
}

#[test]
fn histogram_density_uses_allowed_area() {
    // interior bin
    let m = boundary_corrected_histogram(&[(-140.0, 10.0); 4], vec![-150.0, -130.0], vec![0.0, 20.0], K, E).unwrap();
    assert!((m.values[0] - 1.0 / 400.0).abs() < 1e-15);
    // bin straddling the boundary: density = count / (N * area inside)
    let (e0, e1, l0, l1) = (-150.0, -140.0, 30.0, 40.0);
    let inside = allowed_cell_area(e0, e1, l0, l1, K, E);
    assert!(inside > 0.0 && inside < 100.0);
    let m = boundary_corrected_histogram(&[(-145.0, 31.0)], vec![e0, e1], vec![l0, l1], K, E).unwrap();
    assert!((m.values[0] * inside - 1.0).abs() < 1e-12);
    assert!(boundary_corrected_histogram(&[(-25.0, 1.0)], vec![-26.0, -20.0], vec![0.0, 2.0], K, E).is_err());
}

#[test]
fn histogram_integrates_to_one() {
    let mut samples = Vec::new();
    for i in 0..200 {
        let e = -150.0 + 120.0 * (i as f64 + 0.5) / 200.0;
        let lmax = (K / (-2.0 * e)).sqrt().min(70.0);
        for j in 0..50 {
            samples.push((e, 1.5 + (lmax - 1.5) * (j as f64 + 0.5) / 50.0));
        }
    }
    let (ee, le) = region_edges(&Region::default(), 12, 9);
    let m = boundary_corrected_histogram(&samples, ee.clone(), le.clone(), K, E).unwrap();
    let (ne, nl) = m.shape();
    let mut total = 0.0;
    for i in 0..ne {
        for j in 0..nl {
            total += m.values[m.index(i, j)] * allowed_cell_area(ee[i], ee[i + 1], le[j], le[j + 1], K, E);
        }
    }
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

fn measured(values: Vec<f64>, count: u64) -> DensityMap2D {
    let (ee, le) = region_edges(&Region::default(), 4, 4);
    let mut m = DensityMap2D::zeros(ee, le, Normalization::Probability).unwrap();
    m.counts = Some(vec![count; values.len()]);
    m.values = values;
    m
}

#[test]
fn median_normalization_and_self_comparison() {
    let meas = measured((1..=16).map(|i| i as f64 * 1e-4).collect(), 50);
    let mut pred = meas.clone();
    pred.counts = None;
    pred.normalization = Normalization::Raw;
    for v in &mut pred.values {
        *v *= 37.0;
    }
    let region = Region::default();
    let scaled = normalize_by_median(&pred, &meas, &region, K, E).unwrap();
    assert_eq!(scaled.normalization, Normalization::MedianScaled);
    let rep = residual_ratio_map(&scaled, &meas, 20, &region).unwrap();
    assert!((rep.percentile_16 - 1.0).abs() < 1e-12 && (rep.percentile_84 - 1.0).abs() < 1e-12);
    for v in &mut pred.values {
        *v *= 0.01;
    }
    let again = normalize_by_median(&pred, &meas, &region, K, E).unwrap();
    for (a, b) in again.values.iter().zip(&scaled.values) {
        assert!((a - b).abs() < 1e-12 * b.abs());
    }
}

#[test]
fn ratio_map_masks_sparse_cells() {
    let meas = measured(vec![1.0; 16], 5);
    let rep = residual_ratio_map(&meas, &meas, 20, &Region::default()).unwrap();
    assert_eq!(rep.unmasked, 0);
    assert!(rep.percentile_16.is_nan());
    let rep = residual_ratio_map(&meas, &meas, 5, &Region::default()).unwrap();
    assert_eq!(rep.unmasked, 16);
}

#[test]
fn percentile_examples() {
    let d = [5.0, 1.0, 4.0, 2.0, 3.0];
    assert_eq!(percentile(&d, 50.0), Some(3.0));
    assert_eq!(percentile(&d, 0.0), Some(1.0));
    assert_eq!(percentile(&d, 100.0), Some(5.0));
    assert!((percentile(&d, 16.0).unwrap() - 1.64).abs() < 1e-12);
    assert_eq!(percentile(&[], 16.0), None);
}

#[test]
fn prediction_examples() {
    let (ee, le) = region_edges(&Region::default(), 6, 6);
    let one = predict_with(|_, _| 1.0, ee.clone(), le.clone(), K, E).unwrap();
    let zero = predict_with(|_, _| 0.0, ee.clone(), le.clone(), K, E).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));
    // interior cell: average of l / (-eps)^1.5 over the cell
    let (i, j) = (0, 0);
    let (e0, e1, l0, l1) = (ee[i], ee[i + 1], le[j], le[j + 1]);
    let g = |e: f64| 2.0 / (-e).sqrt();
    let exact = (g(e1) - g(e0)) / (e1 - e0) * 0.5 * (l0 + l1);
    assert!((one.values[one.index(i, j)] / exact - 1.0).abs() < 1e-3);
    // locality
    let (e_cut, l_cut) = (ee[1], le[1]);
    let bump = move |e: f64, l: f64| if e < e_cut && l < l_cut { 0.8 } else { 0.5 };
    let a = predict_with(|_, _| 0.5, ee.clone(), le.clone(), K, E).unwrap();
    let b = predict_with(bump, ee, le, K, E).unwrap();
    for (idx, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        if idx == 0 {
            assert!(y > x);
        } else {
            assert_eq!(x, y);
        }
    }
}

fn level(eps_b: f64, grid: DiskGrid, f: impl Fn(f64, f64) -> f64) -> TrivariateLevel {
    let estimate: Vec<f64> = grid.points.iter().map(|p| f(p.0, p.1)).collect();
    let stderr = vec![0.01; estimate.len()];
    TrivariateLevel { eps_b, grid, estimate, stderr }
}

#[test]
fn constant_trivariate_marginalizes_to_constant() {
    let levels: Vec<_> = [-40.0, -60.0, -80.0]
        .iter()
        .map(|&e| level(e, measurement_disk_grid(max_binary_angmom(e, K).unwrap(), 12).unwrap(), |_, _| 0.42))
        .collect();
    let map = TrivariateMap { levels };
    for (e, l) in [(-40.0, 10.0), (-60.0, 50.0), (-50.0, 30.0), (-80.0, 0.0)] {
        let m = marginalize_absorptivity(&map, e, l, l_total()).unwrap();
        assert!((m.value - 0.42).abs() < 1e-12, "{e} {l}: {}", m.value);
    }
    assert!(marginalize_absorptivity(&map, -100.0, 10.0, l_total()).is_err());
    for half in [DiskHalf::Full, DiskHalf::Prograde, DiskHalf::Retrograde] {
        assert!((disk_mean(&map.levels[0], half).unwrap() - 0.42).abs() < 1e-12);
    }
}

#[test]
fn ring_average_matches_quadrature_oracle() {
    // field depending on l_Bx only: average over uniform l_F of f(l_B cos sigma)
    let lm = max_binary_angmom(-60.0, K).unwrap();
    let lv = level(-60.0, measurement_disk_grid(lm, 28).unwrap(), |x, _| 0.5 + 0.4 * x / lm);
    let l_b = 40.0;
    let got = ring_average(&lv, l_b, l_total(), 64).unwrap();
    // linear in x and l_F uniform: mean of cos sigma = mean of (L^2 + l^2 - l_F^2) / (2 L l)
    let n = 100_000;
    let l = l_total();
    let mean_cos: f64 = (0..n)
        .map(|i| {
            let lf = l - l_b + 2.0 * l_b * (i as f64 + 0.5) / n as f64;
            (l * l + l_b * l_b - lf * lf) / (2.0 * l * l_b)
        })
        .sum::<f64>()
        / n as f64;
    let want = 0.5 + 0.4 * l_b * mean_cos / lm;
    assert!((got.value - want).abs() < 2e-3, "{} vs {want}", got.value);
    assert!(got.stderr > 0.0 && got.stderr <= 0.01 + 1e-12);
}

#[test]
fn prograde_half_sees_larger_l_bx() {
    let lm = max_binary_angmom(-100.0, K).unwrap();
    let lv = level(-100.0, measurement_disk_grid(lm, 12).unwrap(), |x, _| 0.5 + 0.3 * x / lm);
    let pro = disk_mean(&lv, DiskHalf::Prograde).unwrap();
    let retro = disk_mean(&lv, DiskHalf::Retrograde).unwrap();
    let full = disk_mean(&lv, DiskHalf::Full).unwrap();
    assert!(pro > full && full > retro);
    assert!((0.5 * (pro + retro) - full).abs() < 1e-9);
    // mean of x over the half disk is 4 R / (3 pi)
    assert!((pro - (0.5 + 0.3 * 4.0 / (3.0 * std::f64::consts::PI))).abs() < 5e-3);
}

proptest! {
    #[test]
    fn median_scaling_is_homogeneous(c in 1e-3f64..1e3, seed in proptest::collection::vec(0.1f64..10.0, 16)) {
        let meas = measured(seed.iter().map(|v| v * 1e-4).collect(), 100);
        let mut pred = meas.clone();
        for (i, v) in pred.values.iter_mut().enumerate() {
            *v = (i as f64 + 1.0).sqrt();
        }
        let a = normalize_by_median(&pred, &meas, &Region::default(), K, E).unwrap();
        for v in &mut pred.values {
            *v *= c;
        }
        let b = normalize_by_median(&pred, &meas, &Region::default(), K, E).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs());
        }
    }
}
