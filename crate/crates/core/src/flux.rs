//! Asymptotic flux, its marginalizations, and the comparison of predicted
//! and measured outcome distributions on the `(eps_B, l_B)` plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{allowed_region, max_binary_angmom, DiskGrid, DiskInterpolant, TriangulatedField};

/// `l_B / (-eps_B)^(3/2)`, the flux density marginalized to `(eps_B, l_B)`
/// up to a constant.
pub fn marginal_flux_density(eps_b: f64, l_b: f64, k: f64, energy: f64) -> Result<f64> {
    if !allowed_region(eps_b, l_b, k, energy) || l_b < 0.0 {
        return Err(Error::ForbiddenRegion { eps_b, l_b });
    }
    Ok(l_b / (-eps_b).powf(1.5))
}

/// Flux density per `d eps_B d^3l_B d psi_B d psi_F` with the closure
/// `l_F = L - l_B` already resolved: `2 pi sqrt(k) / (-2 eps_B)^(3/2) / (l_B l_F)`.
pub fn full_flux_density(eps_b: f64, l_b: f64, l_f: f64, k: f64) -> Result<f64> {
    if !(eps_b < 0.0) || !(l_b > 0.0) || !(l_f > 0.0) || -2.0 * eps_b * l_b * l_b > k {
        return Err(Error::ForbiddenRegion { eps_b, l_b });
    }
    Ok(2.0 * PI * k.sqrt() / (-2.0 * eps_b).powf(1.5) / (l_b * l_f))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Quadrature("zero nodes".into()));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature(format!("Legendre root {i} of {n}")));
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// Constant `C` with `dF / d eps_B d l_B = C l_B / (-eps_B)^(3/2)`, from
/// the shell-theorem integral `int dOmega / l_F = 4 pi / L`.
pub fn marginal_flux_constant(k: f64, l_total: f64) -> f64 {
    let psi = (2.0 * PI) * (2.0 * PI);
    2.0 * PI * k.sqrt() / 2f64.powf(1.5) * 4.0 * PI / l_total * psi
}

/// `dF / d eps_B d l_B` by quadrature of [`full_flux_density`] over the
/// direction of `l_B` (Gauss-Legendre in `cos sigma`, midpoint in azimuth)
/// and over both pericenter angles.
pub fn marginalize_flux_numeric(
    eps_b: f64,
    l_b: f64,
    k: f64,
    l_total: f64,
    nodes: usize,
) -> Result<f64> {
    if !(l_b > 0.0) || l_b > l_total {
        return Err(Error::InvalidInput(format!(
            "need 0 < l_B <= L, got l_B = {l_b}, L = {l_total}"
        )));
    }
    let (x, w) = gauss_legendre(nodes)?;
    // no dependence on the azimuth of l_B or on either pericenter angle
    let angles = (2.0 * PI).powi(3);
    let mut total = 0.0;
    for (c, wc) in x.iter().zip(&w) {
        let l_f = (l_total * l_total + l_b * l_b - 2.0 * l_total * l_b * c).sqrt();
        total += wc * full_flux_density(eps_b, l_b, l_f, k)? * angles;
    }
    Ok(total * l_b * l_b)
}

/// Tri-variate absorptivity: one half-disk map per binary energy level.
#[derive(Clone, Debug)]
pub struct TrivariateMap {
    pub levels: Vec<TrivariateLevel>,
}

#[derive(Clone, Debug)]
pub struct TrivariateLevel {
    pub eps_b: f64,
    pub grid: DiskGrid,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Marginalized value with its propagated standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marginalized {
    pub value: f64,
    pub stderr: f64,
}

/// Flux-weighted ring average of one level at radius `l_b`: uniform in
/// `l_F` over `[L - l_B, L + l_B]` with `cos sigma = (L^2 + l_B^2 - l_F^2) / (2 L l_B)`.
pub fn ring_average(level: &TrivariateLevel, l_b: f64, l_total: f64, nodes: usize) -> Result<Marginalized> {
    let tol = 1e-9 * level.grid.l_max;
    if l_b > level.grid.l_max + tol || l_b < 0.0 {
        return Err(Error::InsufficientCoverage {
            l_b,
            covered: (level.grid.l_max / l_b).min(1.0),
        });
    }
    let interp = DiskInterpolant::new(&level.grid, &level.estimate, true)?;
    let n = level.grid.points.len();
    let mut weights = vec![0.0; n];
    if l_b == 0.0 {
        for (i, wi) in interp.weights_clamped(0.0, 0.0)? {
            weights[i] += wi;
        }
    } else {
        let (x, w) = gauss_legendre(nodes)?;
        for (xi, wq) in x.iter().zip(&w) {
            let l_f = l_total + l_b * xi;
            let c = ((l_total * l_total + l_b * l_b - l_f * l_f) / (2.0 * l_total * l_b)).clamp(-1.0, 1.0);
            let s = (1.0 - c * c).max(0.0).sqrt();
            for (i, wi) in interp.weights_clamped(l_b * c, l_b * s)? {
                weights[i] += 0.5 * wq * wi;
            }
        }
    }
    let value: f64 = weights.iter().zip(&level.estimate).map(|(a, b)| a * b).sum();
    let var: f64 = weights
        .iter()
        .zip(&level.stderr)
        .map(|(a, s)| a * a * s * s)
        .sum();
    Ok(Marginalized {
        value: value.clamp(0.0, 1.0),
        stderr: var.sqrt(),
    })
}

/// Part of the disk a mean is taken over. Prograde binaries have their
/// angular momentum along the total one (`l_Bx > 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiskHalf {
    Full,
    Prograde,
    Retrograde,
}

/// Area-weighted mean of the interpolated level over the disk (or one half
/// of it), by a polar midpoint rule.
pub fn disk_mean(level: &TrivariateLevel, half: DiskHalf) -> Result<f64> {
    const NR: usize = 48;
    const NT: usize = 96;
    let interp = DiskInterpolant::new(&level.grid, &level.estimate, true)?;
    let (t0, t1) = match half {
        DiskHalf::Full => (0.0, PI),
        DiskHalf::Prograde => (0.0, 0.5 * PI),
        DiskHalf::Retrograde => (0.5 * PI, PI),
    };
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for i in 0..NR {
        let r = (i as f64 + 0.5) / NR as f64 * level.grid.l_max;
        for j in 0..NT {
            let t = t0 + (j as f64 + 0.5) / NT as f64 * (t1 - t0);
            acc += r * interp.eval_clamped(r * t.cos(), r * t.sin())?;
            wsum += r;
        }
    }
    Ok(acc / wsum)
}

/// Bi-variate absorptivity at `(eps_b, l_b)` from the tri-variate map.
/// Energies between levels are interpolated linearly.
pub fn marginalize_absorptivity(
    map: &TrivariateMap,
    eps_b: f64,
    l_b: f64,
    l_total: f64,
) -> Result<Marginalized> {
    const NODES: usize = 64;
    if let Some(level) = map.levels.iter().find(|lv| (lv.eps_b - eps_b).abs() <= 1e-9 * eps_b.abs()) {
        return ring_average(level, l_b, l_total, NODES);
    }
    let mut lo: Option<&TrivariateLevel> = None;
    let mut hi: Option<&TrivariateLevel> = None;
    for lv in &map.levels {
        if lv.eps_b < eps_b && lo.is_none_or(|c| lv.eps_b > c.eps_b) {
            lo = Some(lv);
        }
        if lv.eps_b > eps_b && hi.is_none_or(|c| lv.eps_b < c.eps_b) {
            hi = Some(lv);
        }
    }
    let (lo, hi) = match (lo, hi) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InsufficientCoverage {
                l_b,
                covered: 0.0,
            })
        }
    };
    let t = (eps_b - lo.eps_b) / (hi.eps_b - lo.eps_b);
    let a = ring_average(lo, l_b.min(lo.grid.l_max), l_total, NODES)?;
    let b = ring_average(hi, l_b, l_total, NODES)?;
    Ok(Marginalized {
        value: (1.0 - t) * a.value + t * b.value,
        stderr: ((1.0 - t).powi(2) * a.stderr.powi(2) + t * t * b.stderr.powi(2)).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    Probability,
    MedianScaled,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::Probability => "probability",
            Normalization::MedianScaled => "median-scaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "raw" => Normalization::Raw,
            "probability" => Normalization::Probability,
            "median-scaled" => Normalization::MedianScaled,
            _ => return None,
        })
    }
}

/// Rectangular region of the `(eps_B, l_B)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Region {
    pub eps_min: f64,
    pub eps_max: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            eps_min: -150.0,
            eps_max: -30.0,
            l_min: 1.5,
            l_max: 70.0,
        }
    }
}

impl Region {
    pub fn contains(&self, eps: f64, l: f64) -> bool {
        eps >= self.eps_min && eps <= self.eps_max && l >= self.l_min && l <= self.l_max
    }
}

/// Cellwise density on an `(eps_B, l_B)` histogram grid, row-major in `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap2D {
    pub eps_edges: Vec<f64>,
    pub l_edges: Vec<f64>,
    pub values: Vec<f64>,
    /// Sample counts per cell, for measured maps.
    pub counts: Option<Vec<u64>>,
    pub normalization: Normalization,
}

impl DensityMap2D {
    pub fn zeros(eps_edges: Vec<f64>, l_edges: Vec<f64>, normalization: Normalization) -> Result<Self> {
        for e in [&eps_edges, &l_edges] {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput("bin edges must increase".into()));
            }
        }
        let n = (eps_edges.len() - 1) * (l_edges.len() - 1);
        Ok(Self {
            eps_edges,
            l_edges,
            values: vec![0.0; n],
            counts: None,
            normalization,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.eps_edges.len() - 1, self.l_edges.len() - 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.l_edges.len() - 1) + j
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            0.5 * (self.eps_edges[i] + self.eps_edges[i + 1]),
            0.5 * (self.l_edges[j] + self.l_edges[j + 1]),
        )
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.eps_edges == other.eps_edges && self.l_edges == other.l_edges
    }

    /// Cells whose center lies in `region`.
    pub fn cells_in(&self, region: &Region) -> Vec<usize> {
        let (ne, nl) = self.shape();
        let mut out = Vec::new();
        for i in 0..ne {
            for j in 0..nl {
                let (e, l) = self.center(i, j);
                if region.contains(e, l) {
                    out.push(self.index(i, j));
                }
            }
        }
        out
    }

    /// Bilinear interpolation between cell centers, clamped at the edges.
    pub fn bilinear(&self, eps: f64, l: f64) -> f64 {
        let (ne, nl) = self.shape();
        let locate = |edges: &[f64], n: usize, x: f64| -> (usize, f64) {
            let c = |k: usize| 0.5 * (edges[k] + edges[k + 1]);
            if n == 1 || x <= c(0) {
                return (0, 0.0);
            }
            if x >= c(n - 1) {
                return (n - 2, 1.0);
            }
            let mut k = 0;
            while c(k + 1) < x {
                k += 1;
            }
            (k, (x - c(k)) / (c(k + 1) - c(k)))
        };
        let (i, u) = locate(&self.eps_edges, ne, eps);
        let (j, v) = locate(&self.l_edges, nl, l);
        let i1 = (i + 1).min(ne - 1);
        let j1 = (j + 1).min(nl - 1);
        let f = |a: usize, b: usize| self.values[self.index(a, b)];
        (1.0 - u) * (1.0 - v) * f(i, j) + u * (1.0 - v) * f(i1, j) + (1.0 - u) * v * f(i, j1) + u * v * f(i1, j1)
    }

    /// Map of bilinear values sampled at this map's own cell centers from a
    /// finer-resolution interpolation; the smoothed companion of a histogram.
    pub fn smoothed(&self) -> Self {
        let (ne, nl) = self.shape();
        let mut out = self.clone();
        for i in 0..ne {
            for j in 0..nl {
                let mut acc = 0.0;
                // average the bilinear surface over the cell
                for a in 0..4 {
                    for b in 0..4 {
                        let e = self.eps_edges[i] + (a as f64 + 0.5) / 4.0 * (self.eps_edges[i + 1] - self.eps_edges[i]);
                        let l = self.l_edges[j] + (b as f64 + 0.5) / 4.0 * (self.l_edges[j + 1] - self.l_edges[j]);
                        acc += self.bilinear(e, l);
                    }
                }
                let idx = self.index(i, j);
                out.values[idx] = acc / 16.0;
            }
        }
        out
    }
}

/// Area of `[e0, e1] x [l0, l1]` inside the allowed region.
pub fn allowed_cell_area(e0: f64, e1: f64, l0: f64, l1: f64, k: f64, energy: f64) -> f64 {
    let e1 = e1.min(energy).min(0.0);
    if !(e1 > e0) || !(l1 > l0) {
        return 0.0;
    }
    // boundary l = g(eps) = sqrt(k / (-2 eps)) with antiderivative G
    let big_g = |e: f64| -(2.0 * k).sqrt() * (-e).sqrt();
    let lo_cross = -k / (2.0 * l0 * l0);
    let hi_cross = -k / (2.0 * l1 * l1);
    let mut area = 0.0;
    // g below l0 for eps < lo_cross
    let a = e0.max(lo_cross);
    let b = e1.min(hi_cross);
    if b > a {
        area += big_g(b) - big_g(a) - l0 * (b - a);
    }
    let c = e0.max(hi_cross.max(lo_cross));
    if e1 > c {
        area += (l1 - l0) * (e1 - c);
    }
    area
}

/// Equal-width bin edges.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    crate::grids::linspace(lo, hi, bins + 1)
}

/// 2D histogram whose density uses only the part of each bin inside the
/// allowed region: `count / (N * area(bin and region))`, with `N` the total
/// number of samples including those outside the bins.
pub fn boundary_corrected_histogram(
    samples: &[(f64, f64)],
    eps_edges: Vec<f64>,
    l_edges: Vec<f64>,
    k: f64,
    energy: f64,
) -> Result<DensityMap2D> {
    let mut map = DensityMap2D::zeros(eps_edges, l_edges, Normalization::Probability)?;
    let (ne, nl) = map.shape();
    let mut counts = vec![0u64; ne * nl];
    let find = |edges: &[f64], x: f64| -> Option<usize> {
        let n = edges.len() - 1;
        if x < edges[0] || x > edges[n] {
            return None;
        }
        let k = edges.partition_point(|e| *e <= x);
        Some(k.saturating_sub(1).min(n - 1))
    };
    for &(e, l) in samples {
        if let (Some(i), Some(j)) = (find(&map.eps_edges, e), find(&map.l_edges, l)) {
            counts[map.index(i, j)] += 1;
        }
    }
    let n_total = samples.len() as f64;
    for i in 0..ne {
        for j in 0..nl {
            let idx = map.index(i, j);
            let area = allowed_cell_area(
                map.eps_edges[i],
                map.eps_edges[i + 1],
                map.l_edges[j],
                map.l_edges[j + 1],
                k,
                energy,
            );
            if counts[idx] > 0 && !(area > 0.0) {
                return Err(Error::Data(format!(
                    "{} samples in bin ({i}, {j}) outside the allowed region",
                    counts[idx]
                )));
            }
            map.values[idx] = if area > 0.0 {
                counts[idx] as f64 / (n_total * area)
            } else {
                0.0
            };
        }
    }
    map.counts = Some(counts);
    Ok(map)
}

/// Bi-variate absorptivity measurements on scattered `(eps_B, l_B)` points.
#[derive(Clone, Debug)]
pub struct BivariateAbsorptivity {
    pub points: Vec<(f64, f64)>,
    pub estimate: Vec<f64>,
}

/// Predicted outcome density `E(eps, l) l / (-eps)^(3/2)`, averaged over the
/// allowed part of each cell. Absorptivity outside the measured hull is
/// taken from the nearest hull point.
pub fn predict_outcome_distribution(
    absorptivity: &BivariateAbsorptivity,
    eps_edges: Vec<f64>,
    l_edges: Vec<f64>,
    k: f64,
    energy: f64,
) -> Result<DensityMap2D> {
    let field = TriangulatedField::new(&absorptivity.points, &absorptivity.estimate)?;
    predict_with(|e, l| field.eval_nearest((e, l)).clamp(0.0, 1.0), eps_edges, l_edges, k, energy)
}

/// [`predict_outcome_distribution`] for an absorptivity given as a function.
pub fn predict_with(
    absorptivity: impl Fn(f64, f64) -> f64,
    eps_edges: Vec<f64>,
    l_edges: Vec<f64>,
    k: f64,
    energy: f64,
) -> Result<DensityMap2D> {
    const SUB: usize = 8;
    let mut map = DensityMap2D::zeros(eps_edges, l_edges, Normalization::Raw)?;
    let (ne, nl) = map.shape();
    for i in 0..ne {
        for j in 0..nl {
            let (e0, e1) = (map.eps_edges[i], map.eps_edges[i + 1]);
            let (l0, l1) = (map.l_edges[j], map.l_edges[j + 1]);
            let mut acc = 0.0;
            let mut n = 0usize;
            for a in 0..SUB {
                for b in 0..SUB {
                    let e = e0 + (a as f64 + 0.5) / SUB as f64 * (e1 - e0);
                    let l = l0 + (b as f64 + 0.5) / SUB as f64 * (l1 - l0);
                    if allowed_region(e, l, k, energy) {
                        acc += absorptivity(e, l) * l / (-e).powf(1.5);
                        n += 1;
                    }
                }
            }
            let idx = map.index(i, j);
            map.values[idx] = if n > 0 { acc / n as f64 } else { 0.0 };
        }
    }
    Ok(map)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Scales `pred` so its median over the allowed cells of `region` equals
/// that of `meas`.
pub fn normalize_by_median(
    pred: &DensityMap2D,
    meas: &DensityMap2D,
    region: &Region,
    k: f64,
    energy: f64,
) -> Result<DensityMap2D> {
    if !pred.same_axes(meas) {
        return Err(Error::Incompatible("prediction and measurement bins differ".into()));
    }
    let cells: Vec<usize> = pred
        .cells_in(region)
        .into_iter()
        .filter(|&idx| {
            let (ne, nl) = pred.shape();
            let (i, j) = (idx / nl, idx % nl);
            debug_assert!(i < ne);
            allowed_cell_area(
                pred.eps_edges[i],
                pred.eps_edges[i + 1],
                pred.l_edges[j],
                pred.l_edges[j + 1],
                k,
                energy,
            ) > 0.0
        })
        .collect();
    let mp = median(cells.iter().map(|&i| pred.values[i]).collect()).ok_or(Error::ZeroMedian)?;
    let mm = median(cells.iter().map(|&i| meas.values[i]).collect()).ok_or(Error::ZeroMedian)?;
    if !(mp > 0.0) || !(mm > 0.0) {
        return Err(Error::ZeroMedian);
    }
    let mut out = pred.clone();
    for v in &mut out.values {
        *v *= mm / mp;
    }
    out.normalization = Normalization::MedianScaled;
    Ok(out)
}

/// Linear-interpolation percentile of unsorted data, `q` in `[0, 100]`.
pub fn percentile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `pred / meas` per cell; `None` where masked.
    pub ratio: Vec<Option<f64>>,
    pub percentile_16: f64,
    pub percentile_84: f64,
    pub masked: usize,
    pub unmasked: usize,
}

/// Cellwise `pred / meas` over cells of `region` with at least `min_count`
/// measured samples.
pub fn residual_ratio_map(
    pred: &DensityMap2D,
    meas: &DensityMap2D,
    min_count: u64,
    region: &Region,
) -> Result<ComparisonReport> {
    if !pred.same_axes(meas) {
        return Err(Error::Incompatible("prediction and measurement bins differ".into()));
    }
    let counts = meas
        .counts
        .as_ref()
        .ok_or_else(|| Error::Incompatible("measured map carries no counts".into()))?;
    let inside = pred.cells_in(region);
    let mut ratio = vec![None; pred.values.len()];
    let mut kept = Vec::new();
    for idx in inside.iter().copied() {
        if counts[idx] >= min_count && meas.values[idx] > 0.0 {
            let r = pred.values[idx] / meas.values[idx];
            ratio[idx] = Some(r);
            kept.push(r);
        }
    }
    Ok(ComparisonReport {
        percentile_16: percentile(&kept, 16.0).unwrap_or(f64::NAN),
        percentile_84: percentile(&kept, 84.0).unwrap_or(f64::NAN),
        masked: inside.len() - kept.len(),
        unmasked: kept.len(),
        ratio,
    })
}

/// Edge helper for the default histogram: `bins x bins` over `region`.
pub fn region_edges(region: &Region, eps_bins: usize, l_bins: usize) -> (Vec<f64>, Vec<f64>) {
    (
        uniform_edges(region.eps_min, region.eps_max, eps_bins),
        uniform_edges(region.l_min, region.l_max, l_bins),
    )
}

/// `l_B` value of the circular boundary; re-exported for the pipeline.
pub fn boundary_l(eps_b: f64, k: f64) -> Result<f64> {
    max_binary_angmom(eps_b, k)
}
