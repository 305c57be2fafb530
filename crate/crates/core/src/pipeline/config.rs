//! Campaign configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, PipelineResult};
use crate::classifier::ClassifierConfig;
use crate::dynamics::binary_constant;
use crate::flux::Region;
use crate::grids::BIVARIATE_L_B;
use crate::integrator::IntegratorConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AbsorptivityBivariate,
    AbsorptivityTrivariate,
    Outcome,
    Predict,
    Compare,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AbsorptivityBivariate => "absorptivity-bivariate",
            Mode::AbsorptivityTrivariate => "absorptivity-trivariate",
            Mode::Outcome => "outcome",
            Mode::Predict => "predict",
            Mode::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "absorptivity-bivariate" => Mode::AbsorptivityBivariate,
            "absorptivity-trivariate" => Mode::AbsorptivityTrivariate,
            "outcome" => Mode::Outcome,
            "predict" => Mode::Predict,
            "compare" => Mode::Compare,
            _ => return None,
        })
    }

    pub fn is_absorptivity(self) -> bool {
        matches!(self, Mode::AbsorptivityBivariate | Mode::AbsorptivityTrivariate)
    }

    /// Modes that integrate trajectories.
    pub fn is_simulation(self) -> bool {
        self.is_absorptivity() || self == Mode::Outcome
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    /// Total energy of the absorptivity experiments.
    pub energy: f64,
    /// Total angular momentum of the absorptivity experiments.
    pub angular_momentum: f64,
    pub masses: [f64; 3],
    /// Initial binary-single distance of absorptivity runs, in binary semi-major axes.
    pub separation_multiple: f64,
    /// Outcome runs: circular binary semi-major axis.
    pub semi_major_axis: f64,
    /// Outcome runs: initial distance of the single.
    pub distance: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            energy: -27.0,
            angular_momentum: 75.0 * 1.5f64.sqrt(),
            masses: [15.0; 3],
            separation_multiple: 20.0,
            semi_major_axis: 5.0,
            distance: 100.0,
        }
    }
}

impl Physics {
    pub fn k(&self) -> f64 {
        binary_constant(self.masses[0], self.masses[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Order of the Chebyshev disk lattice.
    pub chebyshev_n: usize,
    /// Tri-variate binary energies; the standard 21 levels when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Bi-variate binary energies; overrides `bivariate_eps_count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bivariate_eps: Option<Vec<f64>>,
    /// Evenly spaced bi-variate energies in `[-150, -30]`.
    pub bivariate_eps_count: usize,
    pub bivariate_l: Vec<f64>,
    /// Add the circular-orbit point `l_B,max(eps_B)` at every bi-variate energy.
    pub bivariate_boundary: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            chebyshev_n: 28,
            levels: None,
            bivariate_eps: None,
            bivariate_eps_count: 100,
            bivariate_l: BIVARIATE_L_B.to_vec(),
            bivariate_boundary: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSpec {
    pub eps_bins: usize,
    pub l_bins: usize,
    pub region: Region,
    /// Cells with fewer measured samples are masked in the comparison.
    pub min_count: u64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            eps_bins: 10,
            l_bins: 10,
            region: Region::default(),
            min_count: 20,
        }
    }
}

/// Input files of the `predict` and `compare` modes, relative to the config
/// file unless absolute.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absorptivity: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign_id: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Realizations per grid point (absorptivity) or in total (outcome).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<u64>,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Realizations simulated between two appends to the record file.
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    /// Flagged fraction above which the campaign reports failure.
    #[serde(default = "default_max_flagged")]
    pub max_flagged_fraction: f64,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig<f64>,
    #[serde(default)]
    pub classifier: ClassifierConfig<f64>,
    #[serde(default)]
    pub histogram: HistogramSpec,
    #[serde(default)]
    pub inputs: Inputs,
}

fn default_chunk_size() -> usize {
    256
}

fn default_max_flagged() -> f64 {
    0.01
}

pub const DESK_ABSORPTIVITY_REALIZATIONS: u64 = 1_000;
pub const DESK_OUTCOME_REALIZATIONS: u64 = 100_000;

impl CampaignConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            campaign_id: None,
            seed: 0,
            realizations: None,
            workers: None,
            chunk_size: default_chunk_size(),
            max_flagged_fraction: default_max_flagged(),
            physics: Physics::default(),
            grid: GridSpec::default(),
            integrator: IntegratorConfig::default(),
            classifier: ClassifierConfig::default(),
            histogram: HistogramSpec::default(),
            inputs: Inputs::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> PipelineResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative input paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> PipelineResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.inputs.absorptivity,
            &mut cfg.inputs.prediction,
            &mut cfg.inputs.outcome,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> PipelineResult<String> {
        toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn campaign_id(&self) -> String {
        self.campaign_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.mode, self.seed))
    }

    pub fn realizations(&self) -> u64 {
        self.realizations.unwrap_or(match self.mode {
            Mode::Outcome => DESK_OUTCOME_REALIZATIONS,
            _ => DESK_ABSORPTIVITY_REALIZATIONS,
        })
    }

    /// Multiplies the realization count by `factor`, keeping at least one.
    pub fn scale(&mut self, factor: f64) -> PipelineResult<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(PipelineError::Config(format!("scale must be positive, got {factor}")));
        }
        self.realizations = Some(((self.realizations() as f64 * factor).round() as u64).max(1));
        Ok(())
    }

    pub fn validate(&self) -> PipelineResult<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let p = &self.physics;
        if p.masses.iter().any(|m| !(*m > 0.0)) {
            return bad("physics.masses must be positive".into());
        }
        if !(p.energy < 0.0) || !(p.angular_momentum > 0.0) {
            return bad("physics.energy must be negative and physics.angular_momentum positive".into());
        }
        if !(p.separation_multiple > 0.0) || !(p.semi_major_axis > 0.0) || !(p.distance > p.semi_major_axis) {
            return bad("physics lengths must be positive with distance > semi_major_axis".into());
        }
        if self.realizations == Some(0) {
            return bad("realizations must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return bad("max_flagged_fraction must lie in [0, 1]".into());
        }
        self.integrator
            .validate()
            .map_err(|e| PipelineError::Config(format!("integrator: {e}")))?;
        self.classifier
            .validate()
            .map_err(|e| PipelineError::Config(format!("classifier: {e}")))?;
        let g = &self.grid;
        if g.chebyshev_n == 0 || g.chebyshev_n % 2 == 1 {
            return bad(format!("grid.chebyshev_n must be even and positive, got {}", g.chebyshev_n));
        }
        if let Some(levels) = &g.levels {
            if levels.is_empty() || levels.iter().any(|e| !(*e < 0.0)) {
                return bad("grid.levels must be non-empty and negative".into());
            }
        }
        if let Some(eps) = &g.bivariate_eps {
            if eps.is_empty() || eps.iter().any(|e| !(*e < 0.0)) {
                return bad("grid.bivariate_eps must be non-empty and negative".into());
            }
        } else if g.bivariate_eps_count == 0 {
            return bad("grid.bivariate_eps_count must be positive".into());
        }
        if g.bivariate_l.iter().any(|l| !(*l >= 0.0)) {
            return bad("grid.bivariate_l must be non-negative".into());
        }
        let h = &self.histogram;
        let r = &h.region;
        if h.eps_bins == 0 || h.l_bins == 0 || !(r.eps_min < r.eps_max) || !(r.l_min < r.l_max) {
            return bad("histogram needs positive bin counts and a non-empty region".into());
        }
        match self.mode {
            Mode::Predict if self.inputs.absorptivity.is_none() => {
                bad("predict mode needs inputs.absorptivity".into())
            }
            Mode::Compare if self.inputs.prediction.is_none() || self.inputs.outcome.is_none() => {
                bad("compare mode needs inputs.prediction and inputs.outcome".into())
            }
            _ => Ok(()),
        }
    }
}
