//! Measurement grids and the allowed binary region.
//!
//! The disk grids live in the `(l_Bx, l_By)` plane, where `l_Bx` is the
//! component of the binary angular momentum along the total one. Only the
//! upper half-disk is measured; values at negative `l_By` are read from the
//! mirror image.

use delaunator::{triangulate, Point};

use crate::error::{Error, Result};

/// `sqrt(-k / (2 eps_B))`, the angular momentum of a circular binary.
pub fn max_binary_angmom(eps_b: f64, k: f64) -> Result<f64> {
    if !(eps_b < 0.0) || !(k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need eps_B < 0 and k > 0, got eps_B = {eps_b}, k = {k}"
        )));
    }
    Ok((-k / (2.0 * eps_b)).sqrt())
}

/// `-2 eps_B l_B^2 <= k` and `eps_B <= E`.
pub fn allowed_region(eps_b: f64, l_b: f64, k: f64, energy: f64) -> bool {
    allowed_region_with_slack(eps_b, l_b, k, energy, 0.0)
}

/// [`allowed_region`] with a relative slack on both inequalities.
pub fn allowed_region_with_slack(eps_b: f64, l_b: f64, k: f64, energy: f64, slack: f64) -> bool {
    eps_b < 0.0
        && -2.0 * eps_b * l_b * l_b <= k * (1.0 + slack)
        && eps_b <= energy + slack * energy.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridProvenance {
    Chebyshev { n: usize },
    Uniform,
    Combined { n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskGrid {
    /// `(l_Bx, l_By)` nodes.
    pub points: Vec<(f64, f64)>,
    pub l_max: f64,
    pub provenance: GridProvenance,
}

/// Absorption counts at one grid point. Undecided runs are excluded from both
/// numerator and denominator of the estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMeasurement {
    pub n_total: u64,
    pub n_absorbed: u64,
    pub n_undecided: u64,
    /// `NaN` when every run was undecided.
    pub estimate: f64,
    pub stderr: f64,
}

impl GridMeasurement {
    pub fn from_counts(n_total: u64, n_absorbed: u64, n_undecided: u64) -> Result<Self> {
        if n_absorbed + n_undecided > n_total {
            return Err(Error::Data(format!(
                "{n_absorbed} absorbed + {n_undecided} undecided exceed {n_total} runs"
            )));
        }
        let decided = n_total - n_undecided;
        let (estimate, stderr) = if decided == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = n_absorbed as f64 / decided as f64;
            (p, (p * (1.0 - p) / decided as f64).sqrt())
        };
        Ok(Self {
            n_total,
            n_absorbed,
            n_undecided,
            estimate,
            stderr,
        })
    }

    pub fn decided(&self) -> u64 {
        self.n_total - self.n_undecided
    }
}

/// Relative tolerance for "on the circle" and duplicate-node tests.
const GEOM_EPS: f64 = 1e-12;

fn push_unique(points: &mut Vec<(f64, f64)>, p: (f64, f64), scale: f64) {
    let tol = GEOM_EPS * scale.max(1.0);
    if !points
        .iter()
        .any(|q| (q.0 - p.0).abs() <= tol && (q.1 - p.1).abs() <= tol)
    {
        points.push(p);
    }
}

fn distinct_sorted(mut v: Vec<f64>, scale: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let tol = GEOM_EPS * scale.max(1.0);
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
    v
}

/// Semicircle nodes at angles `(2i - 1) pi / (2N)`, `i = 1..N`, plus the two
/// ends of the diameter.
pub fn chebyshev_boundary(l_max: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(l_max, 0.0)];
    for i in 1..=n {
        let th = (2 * i - 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
        out.push((l_max * th.cos(), l_max * th.sin()));
    }
    out.push((-l_max, 0.0));
    out
}

/// Lattice spanned by the distinct abscissae and ordinates of the
/// semicircle nodes, clipped to the closed upper half-disk.
pub fn chebyshev_disk_grid(l_max: f64, n: usize) -> Result<DiskGrid> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("N must be even and positive, got {n}")));
    }
    if !(l_max > 0.0) {
        return Err(Error::InvalidInput("l_max must be positive".into()));
    }
    let boundary = chebyshev_boundary(l_max, n);
    let xs = distinct_sorted(boundary.iter().map(|p| p.0).collect(), l_max);
    let ys = distinct_sorted(boundary.iter().map(|p| p.1).collect(), l_max);
    let lim = l_max * l_max * (1.0 + 1e-12);
    let mut points = Vec::new();
    for &y in &ys {
        for &x in &xs {
            if x * x + y * y <= lim {
                points.push((x, y));
            }
        }
    }
    Ok(DiskGrid {
        points,
        l_max,
        provenance: GridProvenance::Chebyshev { n },
    })
}

/// Square lattice through the origin with the given spacing, clipped to the
/// full disk of the given radius.
pub fn uniform_disk_grid(radius: f64, spacing: f64) -> Result<DiskGrid> {
    if !(spacing > 0.0) || !(radius >= 0.0) {
        return Err(Error::InvalidInput("need spacing > 0 and radius >= 0".into()));
    }
    let m = (radius / spacing * (1.0 + 1e-12)).floor() as i64;
    let lim = radius * radius * (1.0 + 1e-12);
    let mut points = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let p = (i as f64 * spacing, j as f64 * spacing);
            if p.0 * p.0 + p.1 * p.1 <= lim {
                points.push(p);
            }
        }
    }
    Ok(DiskGrid {
        points,
        l_max: radius,
        provenance: GridProvenance::Uniform,
    })
}

/// Chebyshev lattice of order `n` plus the upper half of the inner uniform
/// grid of radius `0.4 l_max` and spacing `0.1 l_max`.
pub fn measurement_disk_grid(l_max: f64, n: usize) -> Result<DiskGrid> {
    let cheb = chebyshev_disk_grid(l_max, n)?;
    let inner = uniform_disk_grid(0.4 * l_max, 0.1 * l_max)?;
    let mut points = cheb.points;
    for p in inner.points.into_iter().filter(|p| p.1 >= 0.0) {
        push_unique(&mut points, p, l_max);
    }
    Ok(DiskGrid {
        points,
        l_max,
        provenance: GridProvenance::Combined { n },
    })
}

/// Binary energy levels of the tri-variate campaign, in decreasing order.
pub fn trivariate_energy_levels() -> Vec<f64> {
    let mut v: Vec<f64> = (3..=16).map(|i| -10.0 * i as f64).collect();
    v.extend((9..=15).map(|i| -20.0 * i as f64));
    v
}

/// Fixed `l_B` values of the bi-variate campaign.
pub const BIVARIATE_L_B: [f64; 10] = [1.5, 2.5, 7.5, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `(eps_B, l_B)` points of the bi-variate campaign with `n_eps` energies
/// in `[-150, -30]`: the fixed `l_B` values plus the circular boundary,
/// keeping only allowed points.
pub fn bivariate_grid_with(n_eps: usize, k: f64, energy: f64) -> Vec<(f64, f64)> {
    bivariate_points(&linspace(-150.0, -30.0, n_eps), &BIVARIATE_L_B, true, k, energy)
}

/// Cross product of `energies` and `l_values`, optionally with the circular
/// boundary point of each energy, restricted to the allowed region.
pub fn bivariate_points(
    energies: &[f64],
    l_values: &[f64],
    boundary: bool,
    k: f64,
    energy: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &eps in energies {
        for &l in l_values {
            if allowed_region(eps, l, k, energy) {
                out.push((eps, l));
            }
        }
        if !boundary {
            continue;
        }
        if let Ok(lm) = max_binary_angmom(eps, k) {
            if allowed_region_with_slack(eps, lm, k, energy, 1e-12)
                && !l_values.iter().any(|&l| (l - lm).abs() <= GEOM_EPS * lm)
            {
                out.push((eps, lm));
            }
        }
    }
    out
}

/// Reference charges: k of two masses 15 and E = -27.
pub const REFERENCE_K: f64 = 379_687.5;
pub const REFERENCE_ENERGY: f64 = -27.0;

pub fn bivariate_grid() -> Vec<(f64, f64)> {
    bivariate_grid_with(100, REFERENCE_K, REFERENCE_ENERGY)
}

/// Piecewise-linear field over a Delaunay triangulation of scattered nodes.
#[derive(Clone, Debug)]
pub struct TriangulatedField {
    points: Vec<(f64, f64)>,
    values: Vec<f64>,
    triangles: Vec<[usize; 3]>,
    hull: Vec<usize>,
    /// Coordinate scales used for the triangulation.
    scale: (f64, f64),
}

impl TriangulatedField {
    pub fn new(points: &[(f64, f64)], values: &[f64]) -> Result<Self> {
        if values.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} nodes",
                values.len(),
                points.len()
            )));
        }
        let span = |f: fn(&(f64, f64)) -> f64| {
            let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        };
        let scale = (span(|p| p.0), span(|p| p.1));
        let pts: Vec<Point> = points
            .iter()
            .map(|p| Point {
                x: p.0 / scale.0,
                y: p.1 / scale.1,
            })
            .collect();
        let tri = triangulate(&pts);
        if tri.triangles.is_empty() {
            return Err(Error::InvalidInput("degenerate node set".into()));
        }
        Ok(Self {
            points: points.to_vec(),
            values: values.to_vec(),
            triangles: tri
                .triangles
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect(),
            hull: tri.hull,
            scale,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Barycentric node weights of `q`, or `None` outside the hull.
    pub fn weights(&self, q: (f64, f64)) -> Option<[(usize, f64); 3]> {
        let tol = 1e-10;
        let sc = |p: (f64, f64)| (p.0 / self.scale.0, p.1 / self.scale.1);
        let q = sc(q);
        for t in &self.triangles {
            let (a, b, c) = (sc(self.points[t[0]]), sc(self.points[t[1]]), sc(self.points[t[2]]));
            let det = (b.1 - c.1) * (a.0 - c.0) + (c.0 - b.0) * (a.1 - c.1);
            if det == 0.0 {
                continue;
            }
            let w0 = ((b.1 - c.1) * (q.0 - c.0) + (c.0 - b.0) * (q.1 - c.1)) / det;
            let w1 = ((c.1 - a.1) * (q.0 - c.0) + (a.0 - c.0) * (q.1 - c.1)) / det;
            let w2 = 1.0 - w0 - w1;
            if w0 >= -tol && w1 >= -tol && w2 >= -tol {
                return Some([(t[0], w0), (t[1], w1), (t[2], w2)]);
            }
        }
        None
    }

    pub fn eval(&self, q: (f64, f64)) -> Option<f64> {
        self.weights(q)
            .map(|w| w.iter().map(|&(i, wi)| wi * self.values[i]).sum())
    }

    /// Largest `s <= 1` with `s q` on the hull boundary (rays from the origin).
    pub fn radial_hull_scale(&self, q: (f64, f64)) -> Option<f64> {
        let n = self.hull.len();
        let mut best: Option<f64> = None;
        for i in 0..n {
            let a = self.points[self.hull[i]];
            let b = self.points[self.hull[(i + 1) % n]];
            // s q = a + u (b - a)
            let d = (b.0 - a.0, b.1 - a.1);
            let det = -q.0 * d.1 + q.1 * d.0;
            if det.abs() < 1e-300 {
                continue;
            }
            let s = (-a.0 * d.1 + a.1 * d.0) / det;
            let u = (q.0 * a.1 - q.1 * a.0) / det;
            if (-1e-12..=1.0 + 1e-12).contains(&u) && s > 0.0 && s <= 1.0 + 1e-12 {
                best = Some(best.map_or(s, |v: f64| v.max(s)));
            }
        }
        best.map(|s| s * (1.0 - 1e-12))
    }

    /// Closest point of the hull boundary, in scaled coordinates.
    pub fn nearest_hull_point(&self, q: (f64, f64)) -> (f64, f64) {
        let n = self.hull.len();
        let sc = |p: (f64, f64)| (p.0 / self.scale.0, p.1 / self.scale.1);
        let qs = sc(q);
        let mut best = (f64::INFINITY, q);
        for i in 0..n {
            let a = self.points[self.hull[i]];
            let b = self.points[self.hull[(i + 1) % n]];
            let (sa, sb) = (sc(a), sc(b));
            let d = (sb.0 - sa.0, sb.1 - sa.1);
            let len2 = d.0 * d.0 + d.1 * d.1;
            let u = if len2 > 0.0 {
                (((qs.0 - sa.0) * d.0 + (qs.1 - sa.1) * d.1) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = (sa.0 + u * d.0, sa.1 + u * d.1);
            let dist = (p.0 - qs.0).powi(2) + (p.1 - qs.1).powi(2);
            if dist < best.0 {
                best = (dist, (p.0 * self.scale.0, p.1 * self.scale.1));
            }
        }
        best.1
    }

    /// Value at `q`, with queries outside the hull moved to the nearest
    /// boundary point.
    pub fn eval_nearest(&self, q: (f64, f64)) -> f64 {
        self.eval(q)
            .or_else(|| {
                let p = self.nearest_hull_point(q);
                // nudge toward the centroid so the point lands inside
                let c = self.centroid();
                self.eval((p.0 + 1e-9 * (c.0 - p.0), p.1 + 1e-9 * (c.1 - p.1)))
            })
            .unwrap_or(f64::NAN)
    }

    fn centroid(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let s = self
            .points
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        (s.0 / n, s.1 / n)
    }
}

/// Interpolant over a half-disk grid; negative `l_By` reads the mirror image.
#[derive(Clone, Debug)]
pub struct DiskInterpolant {
    field: TriangulatedField,
    clamp_unit: bool,
}

impl DiskInterpolant {
    /// `clamp_unit` clips results to `[0, 1]`, as for probabilities.
    pub fn new(grid: &DiskGrid, values: &[f64], clamp_unit: bool) -> Result<Self> {
        Ok(Self {
            field: TriangulatedField::new(&grid.points, values)?,
            clamp_unit,
        })
    }

    fn finish(&self, v: f64) -> f64 {
        if self.clamp_unit {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.field
            .eval((x, y.abs()))
            .map(|v| self.finish(v))
            .ok_or(Error::Extrapolation(x, y))
    }

    /// Node weights at `(x, y)` after pulling it radially onto the hull
    /// when it lies outside.
    pub fn weights_clamped(&self, x: f64, y: f64) -> Result<[(usize, f64); 3]> {
        let q = (x, y.abs());
        if let Some(w) = self.field.weights(q) {
            return Ok(w);
        }
        let s = self
            .field
            .radial_hull_scale(q)
            .ok_or(Error::Extrapolation(x, y))?;
        self.field
            .weights((q.0 * s, q.1 * s))
            .ok_or(Error::Extrapolation(x, y))
    }

    /// Like [`eval`](Self::eval), but a query outside the hull is first
    /// pulled radially onto the hull boundary.
    pub fn eval_clamped(&self, x: f64, y: f64) -> Result<f64> {
        let w = self.weights_clamped(x, y)?;
        Ok(self.finish(w.iter().map(|&(i, wi)| wi * self.field.values[i]).sum()))
    }
}

/// One-shot [`DiskInterpolant::eval`].
pub fn interpolate_disk(grid: &DiskGrid, values: &[f64], x: f64, y: f64) -> Result<f64> {
    DiskInterpolant::new(grid, values, false)?.eval(x, y)
}
