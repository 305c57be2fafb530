//! Per-realization records and their CSV persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PipelineError, PipelineResult};
use crate::classifier::{StopReason, TrajectoryVerdict, VerdictKind};
use crate::vec3::Vec3;

/// Column documentation written at the top of every record file.
pub const RECORDS_HEADER: &str = "\
# scatterlab records v1
# campaign: campaign id; point: grid point index; grid_*: grid coordinates (empty when unused)
# realization: index within the point; seed: per-realization RNG seed
# kind: absorbed | regular | escape | undecided; termination: why the run stopped
# escaper: escaping body 1-3; eps_b..l_f: binary and outer charges at breakup, escapes only
# l_bx / l_by: binary angular momentum along / across the total angular momentum
# lifetime: code time at breakup or stop; n_d: democratic count; excursions: accepted excursions
# energy_drift, angmom_drift: relative drifts at termination; steps: accepted integrator steps
";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub campaign: String,
    pub point: u32,
    pub grid_eps_b: Option<f64>,
    pub grid_l_b: Option<f64>,
    pub grid_l_bx: Option<f64>,
    pub grid_l_by: Option<f64>,
    pub realization: u64,
    pub seed: u64,
    pub kind: VerdictKind,
    pub termination: StopReason,
    pub escaper: Option<u8>,
    pub eps_b: Option<f64>,
    pub l_bx: Option<f64>,
    pub l_by: Option<f64>,
    pub l_b: Option<f64>,
    pub eps_f: Option<f64>,
    pub l_f: Option<f64>,
    pub lifetime: f64,
    pub n_d: u32,
    pub excursions: u32,
    pub energy_drift: f64,
    pub angmom_drift: f64,
    pub steps: u64,
}

impl RealizationRecord {
    pub fn key(&self) -> (u32, u64) {
        (self.point, self.realization)
    }

    pub fn is_flagged(&self) -> bool {
        self.termination.is_flagged()
    }

    /// Fills the outcome columns from a verdict. `l_total` orients the
    /// `l_bx` / `l_by` split.
    pub fn set_verdict(&mut self, v: &TrajectoryVerdict<f64>, l_total: Vec3<f64>) {
        self.kind = v.kind;
        self.termination = v.reason;
        self.lifetime = v.lifetime;
        self.n_d = v.democratic_count;
        self.excursions = v.excursion_count;
        self.energy_drift = v.energy_drift;
        self.angmom_drift = v.angular_momentum_drift;
        self.steps = v.steps;
        if let Some(pair) = v.escaper {
            let axis = l_total / l_total.norm();
            let along = v.l_b.dot(axis);
            self.escaper = Some(pair.escaper());
            self.eps_b = Some(v.eps_b);
            self.l_bx = Some(along);
            self.l_by = Some((v.l_b - axis * along).norm());
            self.l_b = Some(v.l_b.norm());
            self.eps_f = Some(v.eps_f);
            self.l_f = Some(v.l_f.norm());
        }
    }
}

/// Seed of realization `index` at grid point `point`: one word of the
/// ChaCha8 stream `point` keyed by the master seed, at a position fixed by
/// `index`. No state is shared between realizations.
pub fn realization_seed(master: u64, point: u32, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(point as u64);
    rng.set_word_pos(index as u128 * 2);
    rng.next_u64()
}

/// Drops a trailing partial line left by an interrupted append.
fn truncate_partial_line(path: &Path) -> PipelineResult<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let len = f.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    let keep = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1) as u64;
    if keep < len {
        f.set_len(keep)?;
        f.seek(SeekFrom::End(0))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> PipelineResult<Vec<RealizationRecord>> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(file));
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Records already on disk, for resuming. A missing file is an empty set.
pub fn load_for_resume(path: &Path) -> PipelineResult<Vec<RealizationRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    truncate_partial_line(path)?;
    let has_header = BufReader::new(File::open(path)?)
        .lines()
        .map_while(|l| l.ok())
        .any(|l| !l.starts_with('#'));
    if !has_header {
        std::fs::remove_file(path)?;
        return Ok(Vec::new());
    }
    read_records(path)
}

/// Appends records, writing the header when the file is new.
pub fn append_records(path: &Path, records: &[RealizationRecord]) -> PipelineResult<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        file.write_all(RECORDS_HEADER.as_bytes())?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner()
        .map_err(|e| PipelineError::Io(e.into_error()))?
        .sync_data()?;
    Ok(())
}

/// Rewrites the file with records sorted by key, atomically.
pub fn write_records(path: &Path, records: &[RealizationRecord]) -> PipelineResult<()> {
    let tmp = path.with_extension("csv.tmp");
    if tmp.exists() {
        std::fs::remove_file(&tmp)?;
    }
    append_records(&tmp, records)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
