//! Declarative experiment description, read from TOML.
//!
//! Relative paths are resolved against the directory holding the config
//! file, so a config and its data files can be moved around together.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    /// Fracture geometry file (one segment per line).
    pub fractures: PathBuf,
    pub properties: PropertiesConfig,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    pub time: TimeConfig,
    pub nlmc: NlmcConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Fine cells `[nx, ny]`.
    pub fine: [usize; 2],
    /// Coarse grids `[mx, my]` to upscale onto.
    pub coarse: Vec<[usize; 2]>,
    #[serde(default = "unit_domain")]
    pub domain: [f64; 4],
}

fn unit_domain() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesConfig {
    pub k1: f64,
    pub k2: f64,
    pub c1: f64,
    pub c2: f64,
    pub cf: f64,
    pub kf: f64,
    #[serde(default = "one")]
    pub bf: f64,
    pub exchange: ExchangeConfig,
    /// Per-cell `k1` raster replacing the constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1_raster: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2_raster: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_field: Option<RandomFieldConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeRuleName {
    /// `σ_12 = σ_1f = k_1` and `σ_2f = k_2`, cell by cell.
    Permeability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExchangeConfig {
    Rule(ExchangeRuleName),
    Constant { sigma12: f64, sigma1f: f64, sigma2f: f64 },
}

/// Log-uniform multiplier on both matrix permeabilities, constant over
/// `block x block` patches of fine cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFieldConfig {
    pub seed: u64,
    /// Half-width of the multiplier range in decades.
    #[serde(default = "one")]
    pub decades: f64,
    #[serde(default = "one_usize")]
    pub block: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceContinuum {
    Matrix1,
    Matrix2,
    Fracture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Two opposite corners `[xa, ya, xb, yb]` in any order.
    pub rect: [f64; 4],
    pub continuum: SourceContinuum,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub p0: f64,
    #[serde(default = "default_report_steps")]
    pub report_steps: Vec<usize>,
}

fn default_report_steps() -> Vec<usize> {
    nlmc_core::metrics::REPORT_STEPS.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeVariantName {
    #[default]
    Full,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingName {
    #[default]
    Unweighted,
    Volume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlmcConfig {
    /// Oversampling layers to run.
    pub layers: Vec<usize>,
    #[serde(default)]
    pub exchange: ExchangeVariantName,
    #[serde(default = "yes")]
    pub zero_row_sum: bool,
    #[serde(default)]
    pub error_weighting: WeightingName,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Default output directory when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write pressure fields at the final step.
    #[serde(default = "yes")]
    pub fields: bool,
    /// Write `R` in MatrixMarket format for every run.
    #[serde(default)]
    pub dump_projection: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text)
            .map_err(|source| ConfigError::Parse { path: PathBuf::from("<string>"), source })?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_path_buf(), source },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn tau(&self) -> f64 {
        self.time.t_max / self.time.steps as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let [nx, ny] = self.grid.fine;
        if nx == 0 || ny == 0 {
            return bad(format!("fine grid {nx}x{ny} is empty"));
        }
        if self.grid.coarse.is_empty() {
            return bad("grid.coarse lists no coarse grid".into());
        }
        for &[mx, my] in &self.grid.coarse {
            if mx == 0 || my == 0 || nx % mx != 0 || ny % my != 0 {
                return bad(format!("fine grid {nx}x{ny} is not nested in coarse grid {mx}x{my}"));
            }
        }
        let [x0, y0, x1, y1] = self.grid.domain;
        if !(x1 > x0 && y1 > y0) || self.grid.domain.iter().any(|v| !v.is_finite()) {
            return bad(format!("domain {:?} must be [x0, y0, x1, y1] with x1 > x0, y1 > y0", self.grid.domain));
        }
        let p = &self.properties;
        for (name, v) in [("k1", p.k1), ("k2", p.k2), ("c1", p.c1), ("c2", p.c2), ("cf", p.cf), ("kf", p.kf), ("bf", p.bf)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("properties.{name} = {v} must be positive"));
            }
        }
        if let ExchangeConfig::Constant { sigma12, sigma1f, sigma2f } = p.exchange {
            if [sigma12, sigma1f, sigma2f].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("exchange coefficients must be positive".into());
            }
        }
        if let Some(rf) = &p.random_field {
            if !(rf.decades >= 0.0 && rf.decades.is_finite()) || rf.block == 0 {
                return bad("random_field needs decades >= 0 and block >= 1".into());
            }
        }
        if !(self.time.t_max > 0.0 && self.time.t_max.is_finite()) {
            return bad(format!("time.t_max = {} must be positive", self.time.t_max));
        }
        if self.time.steps == 0 {
            return bad("time.steps must be at least 1".into());
        }
        if let Some(&m) = self.time.report_steps.iter().find(|&&m| m == 0 || m > self.time.steps) {
            return bad(format!("report step {m} outside 1..={}", self.time.steps));
        }
        if !self.time.p0.is_finite() {
            return bad("time.p0 must be finite".into());
        }
        if self.nlmc.layers.is_empty() || self.nlmc.layers.contains(&0) {
            return bad("nlmc.layers needs at least one entry, all >= 1".into());
        }
        for (i, s) in self.sources.iter().enumerate() {
            if s.rect.iter().any(|v| !v.is_finite()) || !s.rate.is_finite() {
                return bad(format!("source {i} has non-finite values"));
            }
        }
        Ok(())
    }
}
