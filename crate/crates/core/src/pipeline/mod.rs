//! Config-driven campaigns: absorptivity and outcome simulations, the
//! flux-based prediction, and the comparison against the measurement.
//!
//! Every simulation campaign writes into its output directory:
//! `config.toml` (the resolved config), `grid.csv`, `records.csv`, an
//! aggregate (`absorptivity_map.csv` or `outcome_hist.csv`) and
//! `report.txt`. Records are keyed by (point, realization) and seeded
//! independently, so reruns and resumed runs are byte-identical for any
//! worker count.

pub mod aggregate;
pub mod analysis;
pub mod campaign;
pub mod config;
pub mod records;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::flux::{boundary_corrected_histogram, normalize_by_median, predict_outcome_distribution, region_edges, residual_ratio_map};
use crate::grids::{bivariate_points, linspace};
use aggregate::{aggregate_absorptivity, summarize_outcome, OutcomeCuts, OutcomeSummary};
use analysis::{
    absorptivity_for_prediction, level_means, read_density_map, write_density_map, AbsorptivityMapFile,
};
use campaign::{campaign_points, outcome_config, run_realizations, GridPoint};
use config::{CampaignConfig, Mode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Physics(#[from] crate::error::Error),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

pub type PipelineResult<T> = std::result::Result<T, PipelineError>;

/// What a finished run reports back to the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub report: String,
    /// Flagged fraction of a simulation campaign, 0 otherwise.
    pub flagged_fraction: f64,
    pub flag_limit_exceeded: bool,
}

/// Runs `cfg` into `out`, creating the directory.
pub fn run(cfg: &CampaignConfig, out: &Path, progress: &mut dyn FnMut(u64, u64)) -> PipelineResult<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let resolved = cfg.to_toml_string()?;
    let cfg_path = out.join("config.toml");
    if cfg.mode.is_simulation() && out.join("records.csv").exists() && cfg_path.exists() {
        let previous = CampaignConfig::from_toml_str(&std::fs::read_to_string(&cfg_path)?)?;
        if !same_campaign(&previous, cfg) {
            return Err(PipelineError::Config(format!(
                "{} holds a different campaign; use a fresh output directory",
                out.display()
            )));
        }
    }
    std::fs::write(&cfg_path, resolved)?;
    let report = match cfg.mode {
        Mode::AbsorptivityBivariate | Mode::AbsorptivityTrivariate => run_absorptivity(cfg, out, progress)?,
        Mode::Outcome => run_outcome_campaign(cfg, out, progress)?,
        Mode::Predict => run_predict(cfg, out)?,
        Mode::Compare => run_compare(cfg, out)?,
    };
    std::fs::write(out.join("report.txt"), &report.0)?;
    Ok(RunSummary {
        mode: cfg.mode,
        report: report.0,
        flagged_fraction: report.1,
        flag_limit_exceeded: report.1 > cfg.max_flagged_fraction,
    })
}

/// Equal up to settings that cannot change records.
fn same_campaign(a: &CampaignConfig, b: &CampaignConfig) -> bool {
    let strip = |c: &CampaignConfig| {
        let mut c = c.clone();
        c.workers = None;
        c.chunk_size = 1;
        c.max_flagged_fraction = 0.0;
        c.histogram = Default::default();
        c.inputs = Default::default();
        c
    };
    strip(a) == strip(b)
}

/// Writes the grid of a simulation mode to `out/grid.csv`.
pub fn grid_dump(cfg: &CampaignConfig, out: &Path) -> PipelineResult<usize> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let points: Vec<GridPoint> = match cfg.mode {
        Mode::Predict | Mode::Compare => prediction_points(cfg)
            .into_iter()
            .map(|(eps_b, l_b)| GridPoint::Bivariate { eps_b, l_b })
            .collect(),
        _ => campaign_points(cfg)?,
    };
    write_grid(&out.join("grid.csv"), cfg.mode, &points)?;
    Ok(points.len())
}

fn write_grid(path: &Path, mode: Mode, points: &[GridPoint]) -> PipelineResult<()> {
    let mut s = format!("# scatterlab grid v1\n# mode: {mode}\npoint,eps_b,l_b,l_bx,l_by\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (i, p) in points.iter().enumerate() {
        let (x, y) = p.components().unzip();
        writeln!(s, "{i},{},{},{},{}", opt(p.eps_b()), opt(p.l_b()), opt(x), opt(y)).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn prediction_points(cfg: &CampaignConfig) -> Vec<(f64, f64)> {
    let g = &cfg.grid;
    let eps = g
        .bivariate_eps
        .clone()
        .unwrap_or_else(|| linspace(-150.0, -30.0, g.bivariate_eps_count));
    bivariate_points(&eps, &g.bivariate_l, g.bivariate_boundary, cfg.physics.k(), cfg.physics.energy)
}

fn line(s: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(s, "{key} = {value}").unwrap();
}

fn run_absorptivity(
    cfg: &CampaignConfig,
    out: &Path,
    progress: &mut dyn FnMut(u64, u64),
) -> PipelineResult<(String, f64)> {
    write_grid(&out.join("grid.csv"), cfg.mode, &campaign_points(cfg)?)?;
    let records = run_realizations(cfg, out, progress)?;
    let ms = aggregate_absorptivity(&records)?;
    let cheb = (cfg.mode == Mode::AbsorptivityTrivariate).then_some(cfg.grid.chebyshev_n);
    let map = AbsorptivityMapFile::from_measurements(cfg.mode, cheb, &ms);
    map.write(&out.join("absorptivity_map.csv"))?;

    let flagged = records.iter().filter(|r| r.is_flagged()).count();
    let flagged_fraction = flagged as f64 / records.len().max(1) as f64;
    let mut s = String::new();
    line(&mut s, "mode", cfg.mode);
    line(&mut s, "campaign", cfg.campaign_id());
    line(&mut s, "seed", cfg.seed);
    line(&mut s, "points", ms.len());
    line(&mut s, "realizations_per_point", cfg.realizations());
    line(&mut s, "runs", records.len());
    line(&mut s, "absorbed", ms.iter().map(|m| m.measurement.n_absorbed).sum::<u64>());
    line(&mut s, "undecided", ms.iter().map(|m| m.measurement.n_undecided).sum::<u64>());
    line(&mut s, "flagged", flagged);
    line(&mut s, "flagged_fraction", flagged_fraction);
    if cfg.mode == Mode::AbsorptivityTrivariate {
        for lm in level_means(&map.to_trivariate(cfg.physics.k())?)? {
            line(&mut s, &format!("disk_mean[{}]", lm.eps_b), lm.full);
            line(&mut s, &format!("prograde_mean[{}]", lm.eps_b), lm.prograde);
            line(&mut s, &format!("retrograde_mean[{}]", lm.eps_b), lm.retrograde);
        }
    }
    Ok((s, flagged_fraction))
}

pub fn outcome_cuts(cfg: &CampaignConfig) -> OutcomeCuts {
    OutcomeCuts {
        lifetime_cut: cfg.classifier.lifetime_cut,
        min_democratic: cfg.classifier.min_democratic,
        conservation_alarm: cfg.integrator.conservation_alarm,
        masses: cfg.physics.masses,
        energy: outcome_config(cfg).energy(),
        boundary_slack: 1e-6,
    }
}

/// Boundary-corrected histogram of the chaotic escapes on the configured bins.
pub fn outcome_histogram(cfg: &CampaignConfig, summary: &OutcomeSummary) -> PipelineResult<crate::flux::DensityMap2D> {
    let h = &cfg.histogram;
    let (ee, le) = region_edges(&h.region, h.eps_bins, h.l_bins);
    Ok(boundary_corrected_histogram(
        &summary.chaotic_samples,
        ee,
        le,
        cfg.physics.k(),
        outcome_config(cfg).energy(),
    )?)
}

fn run_outcome_campaign(
    cfg: &CampaignConfig,
    out: &Path,
    progress: &mut dyn FnMut(u64, u64),
) -> PipelineResult<(String, f64)> {
    write_grid(&out.join("grid.csv"), cfg.mode, &[GridPoint::Outcome])?;
    let records = run_realizations(cfg, out, progress)?;
    let sm = summarize_outcome(&records, &outcome_cuts(cfg))?;
    let hist = outcome_histogram(cfg, &sm)?;
    let energy = outcome_config(cfg).energy();
    write_density_map(
        &out.join("outcome_hist.csv"),
        &hist,
        cfg.physics.k(),
        energy,
        &[("samples", sm.chaotic_samples.len().to_string())],
    )?;
    let mut s = String::new();
    line(&mut s, "mode", cfg.mode);
    line(&mut s, "campaign", cfg.campaign_id());
    line(&mut s, "seed", cfg.seed);
    line(&mut s, "runs", sm.total);
    for (k, n) in &sm.kinds {
        line(&mut s, &format!("kind[{}]", k.as_str()), n);
    }
    for (k, n) in &sm.terminations {
        line(&mut s, &format!("termination[{k}]"), n);
    }
    line(&mut s, "flagged", sm.flagged);
    line(&mut s, "flagged_fraction", sm.flagged_fraction());
    line(&mut s, "conservation_failures", sm.conservation_failures);
    line(&mut s, "max_energy_drift", sm.max_energy_drift);
    line(&mut s, "max_angmom_drift", sm.max_angmom_drift);
    line(&mut s, "escapes", sm.escapes);
    line(&mut s, "boundary_violations", sm.boundary_violations);
    line(&mut s, "chaotic", sm.chaotic);
    line(&mut s, "chaotic_fraction", sm.chaotic_fraction());
    for (i, f) in sm.chaotic_escape_frequencies().iter().enumerate() {
        line(&mut s, &format!("chaotic_escape_frequency[{}]", i + 1), f);
    }
    Ok((s, sm.flagged_fraction()))
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, what: &str) -> PipelineResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| PipelineError::Config(format!("inputs.{what} is required")))
}

fn run_predict(cfg: &CampaignConfig, out: &Path) -> PipelineResult<(String, f64)> {
    let map = AbsorptivityMapFile::read(required(&cfg.inputs.absorptivity, "absorptivity")?)?;
    let k = cfg.physics.k();
    let (abs, skipped) =
        absorptivity_for_prediction(&map, &prediction_points(cfg), k, cfg.physics.angular_momentum)?;
    if abs.points.len() < 3 {
        return Err(PipelineError::Data("fewer than three absorptivity points to predict from".into()));
    }
    let h = &cfg.histogram;
    let (ee, le) = region_edges(&h.region, h.eps_bins, h.l_bins);
    let energy = outcome_config(cfg).energy();
    let pred = predict_outcome_distribution(&abs, ee, le, k, energy)?;
    write_density_map(
        &out.join("prediction.csv"),
        &pred,
        k,
        energy,
        &[("source", map.mode.to_string())],
    )?;
    let mut s = String::new();
    line(&mut s, "mode", cfg.mode);
    line(&mut s, "source", map.mode);
    line(&mut s, "absorptivity_points", abs.points.len());
    line(&mut s, "skipped_points", skipped);
    line(&mut s, "cells", pred.values.len());
    Ok((s, 0.0))
}

fn run_compare(cfg: &CampaignConfig, out: &Path) -> PipelineResult<(String, f64)> {
    let pred = read_density_map(required(&cfg.inputs.prediction, "prediction")?)?;
    let meas = read_density_map(required(&cfg.inputs.outcome, "outcome")?)?;
    let k = cfg.physics.k();
    let energy = outcome_config(cfg).energy();
    let h = &cfg.histogram;
    let scaled = normalize_by_median(&pred, &meas, &h.region, k, energy)?;
    let rep = residual_ratio_map(&scaled, &meas, h.min_count, &h.region)?;

    #[derive(serde::Serialize)]
    struct Row {
        i: usize,
        j: usize,
        eps_lo: f64,
        eps_hi: f64,
        l_lo: f64,
        l_hi: f64,
        eps_c: f64,
        l_c: f64,
        predicted: f64,
        measured: f64,
        count: u64,
        ratio: Option<f64>,
    }
    let (ne, nl) = meas.shape();
    let counts = meas.counts.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for i in 0..ne {
        for j in 0..nl {
            let idx = meas.index(i, j);
            let (ec, lc) = meas.center(i, j);
            rows.push(Row {
                i,
                j,
                eps_lo: meas.eps_edges[i],
                eps_hi: meas.eps_edges[i + 1],
                l_lo: meas.l_edges[j],
                l_hi: meas.l_edges[j + 1],
                eps_c: ec,
                l_c: lc,
                predicted: scaled.values[idx],
                measured: meas.values[idx],
                count: counts.get(idx).copied().unwrap_or(0),
                ratio: rep.ratio[idx],
            });
        }
    }
    let mut file = std::fs::File::create(out.join("comparison.csv"))?;
    std::io::Write::write_all(
        &mut file,
        b"# scatterlab comparison v1\n# predicted: prediction scaled to the measured median over the region\n# ratio: predicted / measured, empty where masked\n",
    )?;
    let mut w = csv::Writer::from_writer(file);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut s = String::new();
    line(&mut s, "mode", cfg.mode);
    line(&mut s, "unmasked_cells", rep.unmasked);
    line(&mut s, "masked_cells", rep.masked);
    line(&mut s, "min_count", h.min_count);
    line(&mut s, "ratio_p16", rep.percentile_16);
    line(&mut s, "ratio_p84", rep.percentile_84);
    Ok((s, 0.0))
}
