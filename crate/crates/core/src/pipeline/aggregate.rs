//! Reductions of record sets into absorptivity maps and outcome summaries.

use std::collections::{BTreeMap, BTreeSet};

use super::campaign::GridPoint;
use super::records::RealizationRecord;
use super::{PipelineError, PipelineResult};
use crate::classifier::{chaotic_cut, StopReason, VerdictKind};
use crate::dynamics::{binary_constant, PairId};
use crate::grids::{allowed_region_with_slack, GridMeasurement};

/// Measurement at one grid point of an absorptivity campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMeasurement {
    pub point: u32,
    pub grid: GridPoint,
    pub measurement: GridMeasurement,
}

fn check_single_campaign(records: &[RealizationRecord]) -> PipelineResult<()> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.campaign.as_str()).collect();
    if ids.len() > 1 {
        return Err(PipelineError::Data(format!("records from several campaigns: {ids:?}")));
    }
    let mut keys = BTreeSet::new();
    for r in records {
        if !keys.insert(r.key()) {
            return Err(PipelineError::Data(format!(
                "duplicate record (point {}, realization {})",
                r.point, r.realization
            )));
        }
    }
    Ok(())
}

/// Per-point absorption counts, ordered by point index. Independent of
/// record order.
pub fn aggregate_absorptivity(records: &[RealizationRecord]) -> PipelineResult<Vec<PointMeasurement>> {
    check_single_campaign(records)?;
    let mut acc: BTreeMap<u32, (GridPoint, u64, u64, u64)> = BTreeMap::new();
    for r in records {
        let grid = GridPoint::from_record(r);
        let e = acc.entry(r.point).or_insert((grid, 0, 0, 0));
        if e.0 != grid {
            return Err(PipelineError::Data(format!("point {} has inconsistent coordinates", r.point)));
        }
        e.1 += 1;
        match r.kind {
            VerdictKind::Absorbed => e.2 += 1,
            VerdictKind::Undecided => e.3 += 1,
            _ => {}
        }
    }
    acc.into_iter()
        .map(|(point, (grid, n, a, u))| {
            Ok(PointMeasurement {
                point,
                grid,
                measurement: GridMeasurement::from_counts(n, a, u)?,
            })
        })
        .collect()
}

/// Counts and samples of an outcome campaign.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutcomeSummary {
    pub total: u64,
    pub kinds: BTreeMap<VerdictKind, u64>,
    pub terminations: BTreeMap<String, u64>,
    pub flagged: u64,
    pub escapes: u64,
    pub chaotic: u64,
    /// Escapes per escaping body (index 0 is body 1).
    pub escapers: [u64; 3],
    pub chaotic_escapers: [u64; 3],
    /// Escapes outside the allowed binary region.
    pub boundary_violations: u64,
    /// Unflagged runs whose final drift exceeds the alarm.
    pub conservation_failures: u64,
    pub max_energy_drift: f64,
    pub max_angmom_drift: f64,
    /// `(eps_B, l_B)` of the chaotic escapes, in record order.
    pub chaotic_samples: Vec<(f64, f64)>,
}

impl OutcomeSummary {
    pub fn flagged_fraction(&self) -> f64 {
        ratio(self.flagged, self.total)
    }

    pub fn chaotic_fraction(&self) -> f64 {
        ratio(self.chaotic, self.total)
    }

    pub fn chaotic_escape_frequencies(&self) -> [f64; 3] {
        self.chaotic_escapers.map(|c| ratio(c, self.chaotic))
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

/// Settings the outcome reduction depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeCuts {
    pub lifetime_cut: f64,
    pub min_democratic: u32,
    pub conservation_alarm: f64,
    pub masses: [f64; 3],
    /// Total energy of the outcome runs.
    pub energy: f64,
    /// Relative slack of the allowed-region test.
    pub boundary_slack: f64,
}

pub fn summarize_outcome(records: &[RealizationRecord], cuts: &OutcomeCuts) -> PipelineResult<OutcomeSummary> {
    check_single_campaign(records)?;
    let mut s = OutcomeSummary::default();
    let mut ordered: Vec<&RealizationRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.key());
    for r in ordered {
        s.total += 1;
        *s.kinds.entry(r.kind).or_default() += 1;
        *s.terminations.entry(r.termination.as_str().to_owned()).or_default() += 1;
        if r.is_flagged() {
            s.flagged += 1;
        } else {
            let (de, dl) = (r.energy_drift, r.angmom_drift);
            if !(de < cuts.conservation_alarm) || !(dl < cuts.conservation_alarm) {
                s.conservation_failures += 1;
            }
            s.max_energy_drift = s.max_energy_drift.max(de);
            s.max_angmom_drift = s.max_angmom_drift.max(dl);
        }
        if r.kind != VerdictKind::Escape {
            continue;
        }
        let (Some(esc), Some(eps), Some(l)) = (r.escaper, r.eps_b, r.l_b) else {
            return Err(PipelineError::Data(format!("escape record {:?} lacks breakup data", r.key())));
        };
        let pair = PairId::from_escaper(esc)
            .ok_or_else(|| PipelineError::Data(format!("invalid escaper {esc}")))?;
        let (a, b) = pair.members();
        let k = binary_constant(cuts.masses[a], cuts.masses[b]);
        s.escapes += 1;
        s.escapers[esc as usize - 1] += 1;
        if !allowed_region_with_slack(eps, l, k, cuts.energy, cuts.boundary_slack) {
            s.boundary_violations += 1;
        }
        if r.termination == StopReason::Escape
            && chaotic_cut(r.lifetime, r.n_d, cuts.lifetime_cut, cuts.min_democratic)
        {
            s.chaotic += 1;
            s.chaotic_escapers[esc as usize - 1] += 1;
            s.chaotic_samples.push((eps, l));
        }
    }
    Ok(s)
}
