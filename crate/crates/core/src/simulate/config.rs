//! Experiment configuration: a versioned TOML file with shared defaults and
//! per-cell overrides.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

pub const TYPE_I_VALUES: [f64; 7] = [1.0, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3];
pub const TYPE_III_VALUES: [f64; 7] = [1.0, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3];
/// One-based positions of the type II coefficients.
pub const TYPE_II_POSITIONS: [usize; 7] = [1, 17, 33, 49, 65, 81, 97];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaType {
    I,
    II,
    III,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailLaw {
    /// Tail entries drawn from U(−0.5, 0.15) with negatives set to zero.
    NonsparseUniform,
    SparseZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Target population R², from which σ is solved.
    RSquared(f64),
    Sigma(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Fixed(f64),
    Named(String),
}

impl LambdaSetting {
    pub fn fixed(&self) -> Result<Option<f64>> {
        match self {
            LambdaSetting::Fixed(v) => Ok(Some(*v)),
            LambdaSetting::Named(s) if s == "auto" => Ok(None),
            LambdaSetting::Named(s) => Err(Error::Config(format!("lambda must be \"auto\" or a number, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSetting {
    Zero,
    Dantzig,
    /// The true tail coefficients (available only in simulation).
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringSetting {
    None,
    Selection,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentSetting {
    Auto,
    Exact,
    Approx,
}

/// Fully resolved settings for one table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellConfig {
    pub label: String,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta_type: BetaType,
    /// Significant coefficient values; filled from the type unless custom.
    pub beta_values: Vec<f64>,
    /// One-based positions of `beta_values`.
    pub beta_positions: Vec<usize>,
    pub tail: TailLaw,
    pub noise: Noise,
    pub lambda: LambdaSetting,
    /// Pass the true noise level to the selector instead of estimating it.
    pub known_sigma: bool,
    pub kappa: f64,
    pub sis: Option<usize>,
    pub alpha: AlphaSetting,
    pub centering: CenteringSetting,
    pub instrument: InstrumentSetting,
    pub max_exact_rank: usize,
    pub d_pseudo: usize,
    pub bandwidth_scale: f64,
    pub kernel_order: usize,
    pub max_backoff: usize,
    pub realizations: usize,
    pub test_size: usize,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            label: String::new(),
            n: 50,
            p: 100,
            rho: 0.1,
            beta_type: BetaType::I,
            beta_values: TYPE_I_VALUES.to_vec(),
            beta_positions: (1..=7).collect(),
            tail: TailLaw::NonsparseUniform,
            noise: Noise::RSquared(0.98),
            lambda: LambdaSetting::Named("auto".into()),
            known_sigma: true,
            kappa: 0.25,
            sis: None,
            alpha: AlphaSetting::Zero,
            centering: CenteringSetting::Selection,
            instrument: InstrumentSetting::Auto,
            max_exact_rank: crate::instrument::DEFAULT_MAX_EXACT_RANK,
            d_pseudo: 1,
            bandwidth_scale: crate::pipeline::DEFAULT_BANDWIDTH_SCALE,
            kernel_order: 2,
            max_backoff: 4,
            realizations: crate::dantzig::DEFAULT_REALIZATIONS,
            test_size: 100,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellOverrides {
    label: Option<String>,
    n: Option<usize>,
    p: Option<usize>,
    rho: Option<f64>,
    beta_type: Option<BetaType>,
    beta_values: Option<Vec<f64>>,
    beta_positions: Option<Vec<usize>>,
    tail: Option<TailLaw>,
    r_squared: Option<f64>,
    sigma: Option<f64>,
    lambda: Option<LambdaSetting>,
    known_sigma: Option<bool>,
    kappa: Option<f64>,
    sis: Option<usize>,
    alpha: Option<AlphaSetting>,
    centering: Option<CenteringSetting>,
    instrument: Option<InstrumentSetting>,
    max_exact_rank: Option<usize>,
    d_pseudo: Option<usize>,
    bandwidth_scale: Option<f64>,
    kernel_order: Option<usize>,
    max_backoff: Option<usize>,
    realizations: Option<usize>,
    test_size: Option<usize>,
}

impl CellOverrides {
    fn apply(&self, base: &mut CellConfig) -> Result<()> {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { base.$f = v.clone(); } )* };
        }
        set!(
            label,
            n,
            p,
            rho,
            tail,
            lambda,
            known_sigma,
            kappa,
            alpha,
            centering,
            instrument,
            max_exact_rank,
            d_pseudo,
            bandwidth_scale,
            kernel_order,
            max_backoff,
            realizations,
            test_size
        );
        if let Some(s) = self.sis {
            base.sis = Some(s);
        }
        match (self.r_squared, self.sigma) {
            (Some(_), Some(_)) => return Err(Error::Config("give either r_squared or sigma, not both".into())),
            (Some(r), None) => base.noise = Noise::RSquared(r),
            (None, Some(s)) => base.noise = Noise::Sigma(s),
            (None, None) => {}
        }
        if let Some(t) = self.beta_type {
            base.beta_type = t;
            match t {
                BetaType::I => {
                    base.beta_values = TYPE_I_VALUES.to_vec();
                    base.beta_positions = (1..=7).collect();
                }
                BetaType::II => {
                    base.beta_values = TYPE_I_VALUES.to_vec();
                    base.beta_positions = TYPE_II_POSITIONS.to_vec();
                }
                BetaType::III => {
                    base.beta_values = TYPE_III_VALUES.to_vec();
                    base.beta_positions = (1..=7).collect();
                }
                BetaType::Custom => {}
            }
        }
        if let Some(v) = &self.beta_values {
            base.beta_values = v.clone();
        }
        if let Some(v) = &self.beta_positions {
            base.beta_positions = v.clone();
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    name: Option<String>,
    replicates: Option<usize>,
    master_seed: Option<u64>,
    #[serde(default)]
    defaults: CellOverrides,
    #[serde(default)]
    cell: Vec<CellOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub replicates: usize,
    pub master_seed: Option<u64>,
    pub cells: Vec<CellConfig>,
}

pub const DEFAULT_REPLICATES: usize = 50;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let mut base = CellConfig::default();
        file.defaults.apply(&mut base)?;
        let overrides = if file.cell.is_empty() {
            vec![CellOverrides::default()]
        } else {
            file.cell
        };
        let mut cells = Vec::with_capacity(overrides.len());
        for (i, o) in overrides.iter().enumerate() {
            let mut c = base.clone();
            o.apply(&mut c)?;
            if c.label.is_empty() {
                c.label = format!("cell{}", i + 1);
            }
            c.validate()?;
            cells.push(c);
        }
        let cfg = Self {
            name: file.name.unwrap_or_else(|| "experiment".into()),
            replicates: file.replicates.unwrap_or(DEFAULT_REPLICATES),
            master_seed: file.master_seed,
            cells,
        };
        if cfg.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Type I/II/III non-sparse grid at n = 50, p = 100 over the given R² levels.
    pub fn nonsparse_grid(beta_type: BetaType, rho: f64, r_squared: &[f64]) -> Self {
        let cells = r_squared
            .iter()
            .map(|&r| {
                let mut c = CellConfig {
                    rho,
                    noise: Noise::RSquared(r),
                    label: format!("{beta_type:?} R2={r}"),
                    ..Default::default()
                };
                CellOverrides {
                    beta_type: Some(beta_type),
                    ..Default::default()
                }
                .apply(&mut c)
                .expect("built-in override");
                c
            })
            .collect();
        Self {
            name: format!("nonsparse-{beta_type:?}"),
            replicates: DEFAULT_REPLICATES,
            master_seed: None,
            cells,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("cell `{}`: {m}", self.label)));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.beta_values.len() != self.beta_positions.len() || self.beta_values.is_empty() {
            return bad("beta_values and beta_positions must be non-empty and equally long".into());
        }
        let mut pos = self.beta_positions.clone();
        pos.sort_unstable();
        pos.dedup();
        if pos.len() != self.beta_positions.len() {
            return bad("beta_positions contains duplicates".into());
        }
        if pos.first() == Some(&0) || pos.last().is_some_and(|&j| j > self.p) {
            return bad(format!("beta_positions must lie in 1..={}", self.p));
        }
        match self.noise {
            Noise::RSquared(r) if !(r > 0.0 && r < 1.0) => {
                return bad(format!("r_squared must lie in (0, 1), got {r}"))
            }
            Noise::Sigma(s) if !(s > 0.0) => return bad(format!("sigma must be positive, got {s}")),
            _ => {}
        }
        if let Some(v) = self
            .lambda
            .fixed()
            .map_err(|e| Error::Config(format!("cell `{}`: {e}", self.label)))?
        {
            if !(v > 0.0) {
                return bad("fixed lambda must be positive".into());
            }
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be non-negative".into());
        }
        if let Some(s) = self.sis {
            if s == 0 || s > self.p {
                return bad(format!("sis must lie in 1..={}", self.p));
            }
        }
        if self.d_pseudo == 0 {
            return bad("d_pseudo must be at least 1".into());
        }
        if !(self.bandwidth_scale > 0.0) {
            return bad("bandwidth_scale must be positive".into());
        }
        if !matches!(self.kernel_order, 2 | 4 | 6) {
            return bad("kernel_order must be 2, 4 or 6".into());
        }
        if self.test_size == 0 || self.realizations == 0 {
            return bad("test_size and realizations must be positive".into());
        }
        Ok(())
    }
}
