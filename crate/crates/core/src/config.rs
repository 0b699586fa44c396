//! Run configuration: a TOML document with one table per concern. Unknown
//! keys are rejected and every physical parameter is range-checked.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::DensityFamily;
use crate::lattice::MomentumGrid;
use crate::renorm::check_kappa;
use crate::scf::{ChargeSearch, SolverConfig};
use crate::series::GridPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub box_side: f64,
    pub points_per_axis: usize,
    pub cutoff: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            box_side: 4.0,
            points_per_axis: 8,
            cutoff: 4.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<MomentumGrid> {
        MomentumGrid::new(self.box_side, self.points_per_axis, self.cutoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Explicit chemical potentials; when empty, `points` values evenly
    /// spaced on `[mu_min, mu_max]`.
    pub mu: Vec<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mu: Vec::new(),
            mu_min: -0.9,
            mu_max: 0.9,
            points: 11,
        }
    }
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        if !self.mu.is_empty() {
            return self.mu.clone();
        }
        if self.points == 1 {
            return vec![self.mu_min];
        }
        let h = (self.mu_max - self.mu_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.mu_min + h * i as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargeConfig {
    pub target: f64,
    pub charge_tolerance: f64,
    pub mu_tolerance: f64,
    pub window_margin: f64,
}

impl Default for ChargeConfig {
    fn default() -> Self {
        let s = ChargeSearch::default();
        Self {
            target: 0.0,
            charge_tolerance: s.charge_tolerance,
            mu_tolerance: s.mu_tolerance,
            window_margin: s.window_margin,
        }
    }
}

impl ChargeConfig {
    pub fn search(&self) -> ChargeSearch {
        ChargeSearch {
            charge_tolerance: self.charge_tolerance,
            mu_tolerance: self.mu_tolerance,
            window_margin: self.window_margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormConfig {
    pub alpha: f64,
    pub cutoffs: Vec<f64>,
}

impl Default for RenormConfig {
    fn default() -> Self {
        Self {
            alpha: crate::scf::FINE_STRUCTURE,
            cutoffs: vec![0.5, 1.0, 3.0, 10.0, 100.0, 1e4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UehlingConfig {
    pub radii: Vec<f64>,
}

impl Default for UehlingConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub n_max: usize,
    /// Largest physical coupling on the finite-difference ladder is `2·step`.
    pub step: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            n_max: 1,
            step: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymConfig {
    pub order: u32,
    pub kappas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub box_side: f64,
    pub max_dimension: usize,
}

impl Default for AsymConfig {
    fn default() -> Self {
        Self {
            order: 1,
            kappas: vec![0.3, 0.5, 0.7],
            alphas: vec![0.5, 0.7, 1.0],
            box_side: 2.0,
            max_dimension: 4500,
        }
    }
}

impl AsymConfig {
    pub fn policy(&self) -> GridPolicy {
        GridPolicy {
            box_side: self.box_side,
            max_dimension: self.max_dimension,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_density")]
    pub density: DensityFamily,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub charge: ChargeConfig,
    #[serde(default)]
    pub renorm: RenormConfig,
    #[serde(default)]
    pub uehling: UehlingConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub asymcheck: AsymConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_density() -> DensityFamily {
    DensityFamily::gaussian(1.0, 0.5)
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            density: default_density(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            charge: ChargeConfig::default(),
            renorm: RenormConfig::default(),
            uehling: UehlingConfig::default(),
            series: SeriesConfig::default(),
            asymcheck: AsymConfig::default(),
            run: RunConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.box_side > 0.0 && g.box_side.is_finite()) {
            return Err(Error::param(
                "grid.box_side",
                format!("L must be > 0, got {}", g.box_side),
            ));
        }
        if !(g.cutoff > 0.0 && g.cutoff.is_finite()) {
            return Err(Error::param(
                "grid.cutoff",
                format!("Λ must be > 0, got {}", g.cutoff),
            ));
        }
        self.density.validate()?;
        self.solver.validate()?;
        for &mu in self
            .sweep
            .values()
            .iter()
            .chain([self.sweep.mu_min, self.sweep.mu_max].iter())
        {
            if !(mu > -1.0 && mu < 1.0) {
                return Err(Error::param(
                    "sweep.mu",
                    format!("μ must lie in (−1,1), got {mu}"),
                ));
            }
        }
        if self.sweep.points == 0 {
            return Err(Error::param("sweep.points", "must be at least 1"));
        }
        let c = &self.charge;
        if !c.target.is_finite() {
            return Err(Error::param("charge.target", "must be finite"));
        }
        if !(c.charge_tolerance > 0.0
            && c.mu_tolerance > 0.0
            && c.window_margin > 0.0
            && c.window_margin < 1.0)
        {
            return Err(Error::param(
                "charge",
                "tolerances must be > 0 and window_margin in (0,1)",
            ));
        }
        if !(self.renorm.alpha >= 0.0 && self.renorm.alpha.is_finite()) {
            return Err(Error::param(
                "renorm.alpha",
                format!("α must be >= 0, got {}", self.renorm.alpha),
            ));
        }
        if let Some(c) = self
            .renorm
            .cutoffs
            .iter()
            .find(|c| !(**c > 0.0 && c.is_finite()))
        {
            return Err(Error::param(
                "renorm.cutoffs",
                format!("Λ must be > 0, got {c}"),
            ));
        }
        if let Some(x) = self
            .uehling
            .radii
            .iter()
            .find(|x| !(**x >= 0.0 && x.is_finite()))
        {
            return Err(Error::param(
                "uehling.radii",
                format!("radius must be >= 0, got {x}"),
            ));
        }
        if self.series.n_max > crate::series::MAX_ORDER {
            return Err(Error::param(
                "series.n_max",
                format!(
                    "at most {}, got {}",
                    crate::series::MAX_ORDER,
                    self.series.n_max
                ),
            ));
        }
        if !(self.series.step > 0.0) {
            return Err(Error::param(
                "series.step",
                format!("must be > 0, got {}", self.series.step),
            ));
        }
        let a = &self.asymcheck;
        if a.order > 1 {
            return Err(Error::param(
                "asymcheck.order",
                format!("N must be 0 or 1, got {}", a.order),
            ));
        }
        for &k in &a.kappas {
            check_kappa(k)?;
        }
        if let Some(x) = a.alphas.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::param(
                "asymcheck.alphas",
                format!("α_ph must be > 0, got {x}"),
            ));
        }
        if !(a.box_side > 0.0) {
            return Err(Error::param(
                "asymcheck.box_side",
                format!("must be > 0, got {}", a.box_side),
            ));
        }
        if self.run.threads == Some(0) {
            return Err(Error::param("run.threads", "must be at least 1"));
        }
        Ok(())
    }
}
