//! Campaign execution: grid points, realizations, resumable record files.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{CampaignConfig, Mode};
use super::records::{append_records, load_for_resume, realization_seed, write_records, RealizationRecord};
use super::{PipelineError, PipelineResult};
use crate::classifier::{classify_absorption, run_outcome, StopReason, VerdictKind};
use crate::dynamics::total_angular_momentum;
use crate::error::Result;
use crate::grids::{
    allowed_region_with_slack, bivariate_points, linspace, max_binary_angmom, measurement_disk_grid,
    trivariate_energy_levels,
};
use crate::setup::{
    build_absorptivity_ic, build_outcome_ic, AbsorptivityConfig, BinaryAngularMomentum, OutcomeConfig,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridPoint {
    /// `l_F` drawn per realization.
    Bivariate { eps_b: f64, l_b: f64 },
    /// `l_bx` along the total angular momentum, `l_by` across it.
    Trivariate { eps_b: f64, l_bx: f64, l_by: f64 },
    Outcome,
}

impl GridPoint {
    pub fn eps_b(&self) -> Option<f64> {
        match *self {
            GridPoint::Bivariate { eps_b, .. } | GridPoint::Trivariate { eps_b, .. } => Some(eps_b),
            GridPoint::Outcome => None,
        }
    }

    pub fn l_b(&self) -> Option<f64> {
        match *self {
            GridPoint::Bivariate { l_b, .. } => Some(l_b),
            GridPoint::Trivariate { l_bx, l_by, .. } => Some(l_bx.hypot(l_by)),
            GridPoint::Outcome => None,
        }
    }

    pub fn components(&self) -> Option<(f64, f64)> {
        match *self {
            GridPoint::Trivariate { l_bx, l_by, .. } => Some((l_bx, l_by)),
            _ => None,
        }
    }

    /// Point encoded in a record's grid columns.
    pub fn from_record(r: &RealizationRecord) -> Self {
        match (r.grid_eps_b, r.grid_l_b, r.grid_l_bx, r.grid_l_by) {
            (Some(eps_b), _, Some(l_bx), Some(l_by)) => GridPoint::Trivariate { eps_b, l_bx, l_by },
            (Some(eps_b), Some(l_b), _, _) => GridPoint::Bivariate { eps_b, l_b },
            _ => GridPoint::Outcome,
        }
    }

    fn absorptivity_config(&self, cfg: &CampaignConfig) -> Option<AbsorptivityConfig<f64>> {
        let l_b = match *self {
            GridPoint::Bivariate { l_b, .. } => BinaryAngularMomentum::Magnitude(l_b),
            GridPoint::Trivariate { l_bx, l_by, .. } => BinaryAngularMomentum::Components {
                along: l_bx,
                across: l_by,
            },
            GridPoint::Outcome => return None,
        };
        let p = &cfg.physics;
        Some(AbsorptivityConfig {
            energy: p.energy,
            angular_momentum: p.angular_momentum,
            masses: p.masses,
            eps_b: self.eps_b()?,
            l_b,
            separation_multiple: p.separation_multiple,
        })
    }
}

pub fn outcome_config(cfg: &CampaignConfig) -> OutcomeConfig<f64> {
    OutcomeConfig {
        masses: cfg.physics.masses,
        semi_major_axis: cfg.physics.semi_major_axis,
        distance: cfg.physics.distance,
    }
}

/// Grid points of a simulation mode, in campaign order. Points whose
/// scattering geometry is infeasible are dropped.
pub fn campaign_points(cfg: &CampaignConfig) -> PipelineResult<Vec<GridPoint>> {
    let p = &cfg.physics;
    let k = p.k();
    let g = &cfg.grid;
    let points = match cfg.mode {
        Mode::Outcome => return Ok(vec![GridPoint::Outcome]),
        Mode::AbsorptivityBivariate => {
            let eps = g
                .bivariate_eps
                .clone()
                .unwrap_or_else(|| linspace(-150.0, -30.0, g.bivariate_eps_count));
            bivariate_points(&eps, &g.bivariate_l, g.bivariate_boundary, k, p.energy)
                .into_iter()
                .map(|(eps_b, l_b)| GridPoint::Bivariate { eps_b, l_b })
                .collect::<Vec<_>>()
        }
        Mode::AbsorptivityTrivariate => {
            let levels = g.levels.clone().unwrap_or_else(trivariate_energy_levels);
            let mut out = Vec::new();
            for eps_b in levels {
                if !allowed_region_with_slack(eps_b, 0.0, k, p.energy, 0.0) {
                    continue;
                }
                let l_max = max_binary_angmom(eps_b, k)?;
                let grid = measurement_disk_grid(l_max, g.chebyshev_n)?;
                out.extend(
                    grid.points
                        .into_iter()
                        .map(|(l_bx, l_by)| GridPoint::Trivariate { eps_b, l_bx, l_by }),
                );
            }
            out
        }
        Mode::Predict | Mode::Compare => {
            return Err(PipelineError::Config(format!("{} mode has no simulation grid", cfg.mode)))
        }
    };
    Ok(points
        .into_iter()
        .filter(|pt| pt.absorptivity_config(cfg).is_some_and(|a| a.validate().is_ok()))
        .collect())
}

fn blank_record(campaign: &str, point: u32, grid: &GridPoint, index: u64, seed: u64) -> RealizationRecord {
    let (gx, gy) = grid.components().unzip();
    RealizationRecord {
        campaign: campaign.to_owned(),
        point,
        grid_eps_b: grid.eps_b(),
        grid_l_b: grid.l_b(),
        grid_l_bx: gx,
        grid_l_by: gy,
        realization: index,
        seed,
        kind: VerdictKind::Undecided,
        termination: StopReason::Failed,
        escaper: None,
        eps_b: None,
        l_bx: None,
        l_by: None,
        l_b: None,
        eps_f: None,
        l_f: None,
        lifetime: f64::NAN,
        n_d: 0,
        excursions: 0,
        energy_drift: f64::NAN,
        angmom_drift: f64::NAN,
        steps: 0,
    }
}

/// Generates, integrates and classifies one realization. Failures are
/// recorded as undecided with termination `failed`.
pub fn simulate_realization(
    cfg: &CampaignConfig,
    campaign: &str,
    point: u32,
    grid: &GridPoint,
    index: u64,
) -> RealizationRecord {
    let seed = realization_seed(cfg.seed, point, index);
    let mut rec = blank_record(campaign, point, grid, index, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = || -> Result<_> {
        match grid.absorptivity_config(cfg) {
            Some(acfg) => {
                let ic = build_absorptivity_ic(&acfg, &mut rng)?;
                let v = classify_absorption(&ic, &cfg.integrator, &cfg.classifier)?;
                Ok((v, total_angular_momentum(&ic)))
            }
            None => {
                let ic = build_outcome_ic(&outcome_config(cfg), &mut rng)?;
                let v = run_outcome(&ic, &cfg.integrator, &cfg.classifier)?;
                Ok((v, total_angular_momentum(&ic)))
            }
        }
    };
    if let Ok((v, l_total)) = run() {
        rec.set_verdict(&v, l_total);
    }
    rec
}

fn thread_pool(workers: Option<usize>) -> PipelineResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| PipelineError::Runtime(e.to_string()))
}

/// Runs every missing realization of a simulation campaign and leaves
/// `records.csv` in `out` complete and sorted by (point, realization).
/// `progress` receives (finished, total) after each chunk.
pub fn run_realizations(
    cfg: &CampaignConfig,
    out: &Path,
    progress: &mut dyn FnMut(u64, u64),
) -> PipelineResult<Vec<RealizationRecord>> {
    let points = campaign_points(cfg)?;
    let campaign = cfg.campaign_id();
    let n = cfg.realizations();
    let path = out.join("records.csv");
    let mut records = load_for_resume(&path)?;
    if let Some(r) = records.iter().find(|r| r.campaign != campaign) {
        return Err(PipelineError::Data(format!(
            "{} holds records of campaign {}, expected {campaign}",
            path.display(),
            r.campaign
        )));
    }
    for r in &records {
        let expected = points.get(r.point as usize);
        if r.realization >= n || expected != Some(&GridPoint::from_record(r)) {
            return Err(PipelineError::Data(format!(
                "record ({}, {}) does not belong to this campaign's grid",
                r.point, r.realization
            )));
        }
    }
    let done: BTreeSet<(u32, u64)> = records.iter().map(RealizationRecord::key).collect();
    let total = points.len() as u64 * n;
    let pending: Vec<(u32, u64)> = (0..points.len() as u32)
        .flat_map(|p| (0..n).map(move |i| (p, i)))
        .filter(|key| !done.contains(key))
        .collect();
    let pool = thread_pool(cfg.workers)?;
    let mut finished = done.len() as u64;
    progress(finished, total);
    for chunk in pending.chunks(cfg.chunk_size) {
        let batch: Vec<RealizationRecord> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&(p, i)| simulate_realization(cfg, &campaign, p, &points[p as usize], i))
                .collect()
        });
        append_records(&path, &batch)?;
        finished += batch.len() as u64;
        records.extend(batch);
        progress(finished, total);
    }
    records.sort_by_key(RealizationRecord::key);
    records.dedup_by_key(|r| r.key());
    write_records(&path, &records)?;
    Ok(records)
}
