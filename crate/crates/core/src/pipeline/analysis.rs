//! Aggregate files: absorptivity maps, density maps, prediction and comparison.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::PointMeasurement;
use super::campaign::GridPoint;
use super::config::Mode;
use super::{PipelineError, PipelineResult};
use crate::flux::{
    allowed_cell_area, disk_mean, marginalize_absorptivity, BivariateAbsorptivity, DensityMap2D, DiskHalf,
    Normalization, TrivariateLevel, TrivariateMap,
};
use crate::grids::{max_binary_angmom, DiskGrid, GridMeasurement, GridProvenance};

/// `# key: value` lines at the top of a file.
pub fn read_header(path: &Path) -> PipelineResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.split_once(':') {
            out.insert(k.trim().to_owned(), v.trim().to_owned());
        }
    }
    Ok(out)
}

fn csv_reader(path: &Path) -> PipelineResult<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(File::open(path)?))
}

fn write_csv<S: Serialize>(path: &Path, header: &[(&str, String)], rows: &[S]) -> PipelineResult<()> {
    let mut file = File::create(path)?;
    for (k, v) in header {
        writeln!(file, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub point: u32,
    pub eps_b: f64,
    pub l_b: f64,
    pub l_bx: Option<f64>,
    pub l_by: Option<f64>,
    /// Copy of a measured row reflected to `-l_by`.
    pub mirrored: bool,
    pub n_total: u64,
    pub n_absorbed: u64,
    pub n_undecided: u64,
    pub estimate: f64,
    pub stderr: f64,
}

impl MapRow {
    pub fn measurement(&self) -> GridMeasurement {
        GridMeasurement {
            n_total: self.n_total,
            n_absorbed: self.n_absorbed,
            n_undecided: self.n_undecided,
            estimate: self.estimate,
            stderr: self.stderr,
        }
    }
}

/// Absorptivity map as stored in `absorptivity_map.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptivityMapFile {
    pub mode: Mode,
    pub chebyshev_n: Option<usize>,
    pub rows: Vec<MapRow>,
}

impl AbsorptivityMapFile {
    pub fn from_measurements(mode: Mode, chebyshev_n: Option<usize>, ms: &[PointMeasurement]) -> Self {
        let mut rows = Vec::new();
        for m in ms {
            let g = m.measurement;
            let mut row = MapRow {
                point: m.point,
                eps_b: m.grid.eps_b().unwrap_or(f64::NAN),
                l_b: m.grid.l_b().unwrap_or(f64::NAN),
                l_bx: None,
                l_by: None,
                mirrored: false,
                n_total: g.n_total,
                n_absorbed: g.n_absorbed,
                n_undecided: g.n_undecided,
                estimate: g.estimate,
                stderr: g.stderr,
            };
            if let GridPoint::Trivariate { l_bx, l_by, .. } = m.grid {
                row.l_bx = Some(l_bx);
                row.l_by = Some(l_by);
                rows.push(row.clone());
                if l_by > 0.0 {
                    row.l_by = Some(-l_by);
                    row.mirrored = true;
                    rows.push(row);
                }
            } else {
                rows.push(row);
            }
        }
        Self { mode, chebyshev_n, rows }
    }

    pub fn write(&self, path: &Path) -> PipelineResult<()> {
        let mut header = vec![
            ("scatterlab absorptivity map", "v1".to_owned()),
            ("mode", self.mode.to_string()),
        ];
        if let Some(n) = self.chebyshev_n {
            header.push(("chebyshev_n", n.to_string()));
        }
        if self.mode == Mode::AbsorptivityTrivariate {
            header.push((
                "symmetry",
                "y-reflection assumed for equal masses; rows with mirrored = true copy the measured row at -l_by"
                    .to_owned(),
            ));
        }
        header.push(("estimate", "n_absorbed / (n_total - n_undecided), NaN when all undecided".to_owned()));
        write_csv(path, &header, &self.rows)
    }

    pub fn read(path: &Path) -> PipelineResult<Self> {
        let header = read_header(path)?;
        let mode = header
            .get("mode")
            .and_then(|m| Mode::parse(m))
            .filter(|m| m.is_absorptivity())
            .ok_or_else(|| PipelineError::Data(format!("{}: missing or invalid mode header", path.display())))?;
        let chebyshev_n = header.get("chebyshev_n").and_then(|n| n.parse().ok());
        let rows = csv_reader(path)?
            .deserialize()
            .collect::<Result<Vec<MapRow>, _>>()?;
        Ok(Self { mode, chebyshev_n, rows })
    }

    /// Measured rows with a finite estimate.
    fn measured(&self) -> impl Iterator<Item = &MapRow> {
        self.rows.iter().filter(|r| !r.mirrored && r.estimate.is_finite())
    }

    /// Levels in file order; each level's disk radius is the circular limit.
    pub fn to_trivariate(&self, k: f64) -> PipelineResult<TrivariateMap> {
        if self.mode != Mode::AbsorptivityTrivariate {
            return Err(PipelineError::Data("not a tri-variate map".into()));
        }
        let mut levels: Vec<TrivariateLevel> = Vec::new();
        for r in self.measured() {
            let (Some(x), Some(y)) = (r.l_bx, r.l_by) else {
                return Err(PipelineError::Data(format!("row {} lacks disk coordinates", r.point)));
            };
            let idx = match levels.iter().position(|lv| lv.eps_b == r.eps_b) {
                Some(i) => i,
                None => {
                    levels.push(TrivariateLevel {
                        eps_b: r.eps_b,
                        grid: DiskGrid {
                            points: Vec::new(),
                            l_max: max_binary_angmom(r.eps_b, k)?,
                            provenance: GridProvenance::Combined {
                                n: self.chebyshev_n.unwrap_or(0),
                            },
                        },
                        estimate: Vec::new(),
                        stderr: Vec::new(),
                    });
                    levels.len() - 1
                }
            };
            let lv = &mut levels[idx];
            lv.grid.points.push((x, y));
            lv.estimate.push(r.estimate);
            lv.stderr.push(r.stderr);
        }
        Ok(TrivariateMap { levels })
    }

    pub fn to_bivariate(&self) -> PipelineResult<BivariateAbsorptivity> {
        if self.mode != Mode::AbsorptivityBivariate {
            return Err(PipelineError::Data("not a bi-variate map".into()));
        }
        let rows: Vec<&MapRow> = self.measured().collect();
        Ok(BivariateAbsorptivity {
            points: rows.iter().map(|r| (r.eps_b, r.l_b)).collect(),
            estimate: rows.iter().map(|r| r.estimate).collect(),
        })
    }

    pub fn bivariate_measurements(&self) -> Vec<(f64, f64, GridMeasurement)> {
        self.measured().map(|r| (r.eps_b, r.l_b, r.measurement())).collect()
    }
}

/// Disk means of one tri-variate level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelMeans {
    pub eps_b: f64,
    pub full: f64,
    pub prograde: f64,
    pub retrograde: f64,
}

pub fn level_means(map: &TrivariateMap) -> PipelineResult<Vec<LevelMeans>> {
    map.levels
        .iter()
        .map(|lv| {
            Ok(LevelMeans {
                eps_b: lv.eps_b,
                full: disk_mean(lv, DiskHalf::Full)?,
                prograde: disk_mean(lv, DiskHalf::Prograde)?,
                retrograde: disk_mean(lv, DiskHalf::Retrograde)?,
            })
        })
        .collect()
}

/// Agreement of the marginalized tri-variate map with bi-variate points that
/// sit on one of its energy levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub shared: usize,
    pub within: usize,
    /// `(eps_B, l_B, marginalized, measured, z)` per shared point.
    pub points: Vec<(f64, f64, f64, f64, f64)>,
}

impl ConsistencyReport {
    pub fn fraction(&self) -> f64 {
        if self.shared == 0 {
            f64::NAN
        } else {
            self.within as f64 / self.shared as f64
        }
    }
}

pub fn marginalization_consistency(
    tri: &TrivariateMap,
    biv: &[(f64, f64, GridMeasurement)],
    l_total: f64,
    n_sigma: f64,
) -> PipelineResult<ConsistencyReport> {
    let mut rep = ConsistencyReport {
        shared: 0,
        within: 0,
        points: Vec::new(),
    };
    for &(eps, l, m) in biv {
        let Some(level) = tri.levels.iter().find(|lv| (lv.eps_b - eps).abs() <= 1e-9 * eps.abs()) else {
            continue;
        };
        if l > level.grid.l_max * (1.0 + 1e-9) || !m.estimate.is_finite() {
            continue;
        }
        let marg = marginalize_absorptivity(tri, eps, l, l_total)?;
        let diff = (marg.value - m.estimate).abs();
        let sigma = marg.stderr.hypot(m.stderr);
        let z = if sigma > 0.0 {
            diff / sigma
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        rep.shared += 1;
        if z <= n_sigma {
            rep.within += 1;
        }
        rep.points.push((eps, l, marg.value, m.estimate, z));
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub i: usize,
    pub j: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub l_lo: f64,
    pub l_hi: f64,
    pub count: Option<u64>,
    pub allowed_area: f64,
    pub density: f64,
}

/// Writes a density map cell by cell.
pub fn write_density_map(
    path: &Path,
    map: &DensityMap2D,
    k: f64,
    energy: f64,
    extra: &[(&str, String)],
) -> PipelineResult<()> {
    let (ne, nl) = map.shape();
    let mut rows = Vec::with_capacity(ne * nl);
    for i in 0..ne {
        for j in 0..nl {
            let idx = map.index(i, j);
            let (e0, e1, l0, l1) = (map.eps_edges[i], map.eps_edges[i + 1], map.l_edges[j], map.l_edges[j + 1]);
            rows.push(CellRow {
                i,
                j,
                eps_lo: e0,
                eps_hi: e1,
                l_lo: l0,
                l_hi: l1,
                count: map.counts.as_ref().map(|c| c[idx]),
                allowed_area: allowed_cell_area(e0, e1, l0, l1, k, energy),
                density: map.values[idx],
            });
        }
    }
    let mut header = vec![("normalization", map.normalization.as_str().to_owned())];
    header.extend(extra.iter().cloned());
    write_csv(path, &header, &rows)
}

pub fn read_density_map(path: &Path) -> PipelineResult<DensityMap2D> {
    let header = read_header(path)?;
    let norm = header
        .get("normalization")
        .and_then(|n| Normalization::parse(n))
        .ok_or_else(|| PipelineError::Data(format!("{}: missing normalization header", path.display())))?;
    let rows = csv_reader(path)?
        .deserialize()
        .collect::<Result<Vec<CellRow>, _>>()?;
    let ne = rows.iter().map(|r| r.i + 1).max().unwrap_or(0);
    let nl = rows.iter().map(|r| r.j + 1).max().unwrap_or(0);
    if rows.len() != ne * nl || ne == 0 {
        return Err(PipelineError::Data(format!("{}: incomplete cell table", path.display())));
    }
    let mut eps_edges = vec![f64::NAN; ne + 1];
    let mut l_edges = vec![f64::NAN; nl + 1];
    for r in &rows {
        eps_edges[r.i] = r.eps_lo;
        eps_edges[r.i + 1] = r.eps_hi;
        l_edges[r.j] = r.l_lo;
        l_edges[r.j + 1] = r.l_hi;
    }
    let mut map = DensityMap2D::zeros(eps_edges, l_edges, norm)?;
    let counted = rows.iter().all(|r| r.count.is_some());
    let mut counts = vec![0u64; ne * nl];
    for r in &rows {
        let idx = map.index(r.i, r.j);
        map.values[idx] = r.density;
        counts[idx] = r.count.unwrap_or(0);
    }
    if counted {
        map.counts = Some(counts);
    }
    Ok(map)
}

/// Bi-variate absorptivity used for a prediction: measured points as they
/// are, or the tri-variate map marginalized onto `points`. Points the
/// tri-variate map cannot cover are skipped and counted.
pub fn absorptivity_for_prediction(
    map: &AbsorptivityMapFile,
    points: &[(f64, f64)],
    k: f64,
    l_total: f64,
) -> PipelineResult<(BivariateAbsorptivity, usize)> {
    match map.mode {
        Mode::AbsorptivityBivariate => Ok((map.to_bivariate()?, 0)),
        _ => {
            let tri = map.to_trivariate(k)?;
            let mut out = BivariateAbsorptivity {
                points: Vec::new(),
                estimate: Vec::new(),
            };
            let mut skipped = 0;
            for &(eps, l) in points {
                match marginalize_absorptivity(&tri, eps, l, l_total) {
                    Ok(m) => {
                        out.points.push((eps, l));
                        out.estimate.push(m.value);
                    }
                    Err(_) => skipped += 1,
                }
            }
            Ok((out, skipped))
        }
    }
}
