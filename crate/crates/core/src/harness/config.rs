use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::benefit::{BenefitFamily, BenefitFunction, BenefitProfile};
use crate::design::{AffineRow, IrEncoding};
use crate::error::{Error, Result};
use crate::grid::{self, GridCase};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "LOTTERY_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Equilibrium,
    Analyze,
    Design,
    Casestudy,
    Selftest,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Equilibrium => "equilibrium",
            Pipeline::Analyze => "analyze",
            Pipeline::Design => "design",
            Pipeline::Casestudy => "casestudy",
            Pipeline::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenefitSpec {
    #[serde(default = "default_family")]
    pub family: BenefitFamily,
    /// Explicit coefficients, one per player.
    pub coefficients: Option<Vec<f64>>,
    /// Coefficient `offset + bus id` for each load bus of the grid case.
    pub bus_offset: Option<f64>,
}

fn default_family() -> BenefitFamily {
    BenefitFamily::ScaledLog
}

impl Default for BenefitSpec {
    fn default() -> Self {
        Self { family: BenefitFamily::ScaledLog, coefficients: None, bus_offset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub reward: f64,
    /// Defaults to all zeros.
    pub perturbation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rewards: Vec<f64>,
    pub perturbation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSource {
    #[default]
    None,
    Inline {
        rows: Vec<AffineRow>,
    },
    Grid {
        /// Path to a MATPOWER case, relative to the config file, or `"builtin:case30"`.
        case: String,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default = "default_hours")]
        hours: f64,
    },
}

fn default_scale() -> f64 {
    1.3
}
fn default_rate() -> f64 {
    0.1
}
fn default_hours() -> f64 {
    1.0
}

/// Tolerances used by the verification checks, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub foc: f64,
    pub best_response: f64,
    pub property: f64,
    pub sandwich: f64,
    pub line_utilization_pct: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            foc: 1e-8,
            best_response: 1e-5,
            property: crate::analysis::PROPERTY_TOL,
            sandwich: crate::analysis::SANDWICH_TOL,
            line_utilization_pct: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestSpec {
    /// Random `(instance, design point)` pairs in the property suite.
    pub corpus_size: usize,
}

impl Default for SelftestSpec {
    fn default() -> Self {
        Self { corpus_size: 50 }
    }
}

/// A scenario file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Pipeline to run when the caller does not choose one.
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub benefit: BenefitSpec,
    pub point: Option<PointSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub constraints: ConstraintSource,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub r_min: Option<f64>,
    pub individual_rationality: Option<IrEncoding>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub selftest: SelftestSpec,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            pipeline: None,
            benefit: BenefitSpec::default(),
            point: None,
            sweep: None,
            constraints: ConstraintSource::None,
            alpha: 1.0,
            r_min: None,
            individual_rationality: None,
            tolerances: Tolerances::default(),
            selftest: SelftestSpec::default(),
            output_dir: None,
            seed: 0,
            workers: None,
            base_dir: PathBuf::from("."),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if let Some(s) = &self.sweep {
            if s.rewards.is_empty() {
                return Err(Error::Config("sweep.rewards must be nonempty".into()));
            }
        }
        if self.benefit.coefficients.is_some() && self.benefit.bus_offset.is_some() {
            return Err(Error::Config("benefit: give either coefficients or bus_offset, not both".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let ConstraintSource::Grid { case, .. } = &self.constraints {
            if self.case_path(case).is_some_and(|p| !p.exists()) {
                return Err(Error::Config(format!("grid case {case:?} not found")));
            }
        }
        Ok(())
    }

    fn case_path(&self, case: &str) -> Option<PathBuf> {
        if case.starts_with("builtin:") {
            None
        } else {
            Some(self.base_dir.join(case))
        }
    }

    /// Parses the configured grid case, if any.
    pub fn grid_case(&self) -> Result<Option<GridCase>> {
        let ConstraintSource::Grid { case, .. } = &self.constraints else { return Ok(None) };
        let text = match self.case_path(case) {
            None if case == "builtin:case30" => grid::CASE30.to_string(),
            None => return Err(Error::Config(format!("unknown builtin case {case:?}"))),
            Some(path) => std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
        };
        grid::parse_case(&text).map(Some)
    }

    /// Benefit profile; `load_buses` supplies bus ids for `bus_offset`.
    pub fn profile(&self, load_buses: Option<&[usize]>) -> Result<BenefitProfile> {
        let coefficients: Vec<f64> = match (&self.benefit.coefficients, self.benefit.bus_offset) {
            (Some(a), None) => a.clone(),
            (None, Some(offset)) => {
                let buses =
                    load_buses.ok_or_else(|| Error::Config("benefit.bus_offset needs grid constraints".into()))?;
                buses.iter().map(|b| offset + *b as f64).collect()
            }
            (None, None) => return Err(Error::Config("benefit: coefficients or bus_offset required".into())),
            (Some(_), Some(_)) => unreachable!("rejected by validate"),
        };
        let functions =
            coefficients.iter().map(|&a| BenefitFunction::new(self.benefit.family, a)).collect::<Result<Vec<_>>>()?;
        BenefitProfile::new(functions)
    }
}
