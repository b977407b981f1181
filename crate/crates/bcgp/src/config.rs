//! Experiment configuration, read from TOML (or JSON by file extension).
//!
//! ```toml
//! geometry = "plate.json"      # optional, the bundled plate when absent
//! step_mm = 5.0
//! m = 256
//! seed = 1
//! out = "out"
//!
//! [kernel]
//! family = "matern32"
//!
//! [qpso]
//! swarm = 40
//! iters = 200
//!
//! [[scenario]]
//! spacing_mm = 40.0
//! boundary_mode = "no_boundary"
//! coverage = "full"
//! pairs = "all"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bcgp_core::synth::{pair_sensors, BoundaryMode, Coverage, ScenarioSpec, DEFAULT_WAVE_SPEED, PAIR_COUNT, PLATE_STEP};
use bcgp_core::{FitOptions, GridMask, Hyperparams, KernelFamily, KernelSpec, QpsoConfig};
use serde::{Deserialize, Serialize};

use crate::formats::{parse_boundary, GeometryFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: String,
    /// Fixed hyperparameters, used only when `optimise = false`.
    #[serde(default)]
    pub sigma_f2: Option<f64>,
    #[serde(default)]
    pub lengthscale_mm: Option<f64>,
    #[serde(default)]
    pub noise_var: Option<f64>,
    #[serde(default = "default_true")]
    pub optimise: bool,
    /// Subtract the training mean before fitting.
    #[serde(default)]
    pub center_targets: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: default_family(),
            sigma_f2: None,
            lengthscale_mm: None,
            noise_var: None,
            optimise: true,
            center_targets: false,
        }
    }
}

fn default_family() -> String {
    "matern32".into()
}

fn default_true() -> bool {
    true
}

impl KernelConfig {
    pub fn family(&self) -> Result<KernelFamily> {
        KernelFamily::from_name(&self.family).with_context(|| format!("unknown kernel.family {:?}", self.family))
    }

    /// The fixed hyperparameters when optimisation is off.
    pub fn fixed(&self) -> Result<Option<Hyperparams>> {
        if self.optimise {
            return Ok(None);
        }
        let (Some(s), Some(l), Some(n)) = (self.sigma_f2, self.lengthscale_mm, self.noise_var) else {
            bail!("kernel.optimise = false needs kernel.sigma_f2, kernel.lengthscale_mm and kernel.noise_var");
        };
        Ok(Some(Hyperparams::new(KernelSpec::new(self.family()?, s, l)?, n)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpsoSection {
    #[serde(default = "default_swarm")]
    pub swarm: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ce_start")]
    pub ce_start: f64,
    #[serde(default = "default_ce_end")]
    pub ce_end: f64,
}

impl Default for QpsoSection {
    fn default() -> Self {
        Self { swarm: default_swarm(), iters: default_iters(), seed: 0, ce_start: default_ce_start(), ce_end: default_ce_end() }
    }
}

fn default_swarm() -> usize {
    40
}
fn default_iters() -> usize {
    200
}
fn default_ce_start() -> f64 {
    1.0
}
fn default_ce_end() -> f64 {
    0.5
}

impl QpsoSection {
    pub fn to_config(&self, seed: u64) -> QpsoConfig {
        QpsoConfig {
            swarm: self.swarm,
            iterations: self.iters,
            ce_start: self.ce_start,
            ce_end: self.ce_end,
            bounds: Vec::new(),
            seed,
        }
    }
}

/// Either `"all"` or an explicit list of 1-based pair indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairList {
    Named(String),
    List(Vec<usize>),
}

impl PairList {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            PairList::Named(s) if s == "all" => Ok((1..=PAIR_COUNT).collect()),
            PairList::Named(s) => bail!("unknown pair list {s:?}; use \"all\" or a list of indices"),
            PairList::List(v) => {
                for &p in v {
                    pair_sensors(p)?;
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub spacing_mm: f64,
    pub boundary_mode: String,
    #[serde(default = "default_coverage")]
    pub coverage: String,
    #[serde(default = "default_pairs")]
    pub pairs: PairList,
    #[serde(default)]
    pub seed: u64,
}

fn default_coverage() -> String {
    "full".into()
}

fn default_pairs() -> PairList {
    PairList::Named("all".into())
}

impl ScenarioConfig {
    pub fn spec(&self) -> Result<ScenarioSpec> {
        let spec = ScenarioSpec {
            spacing: self.spacing_mm,
            boundary_mode: BoundaryMode::from_name(&self.boundary_mode)
                .with_context(|| format!("unknown boundary_mode {:?}", self.boundary_mode))?,
            coverage: Coverage::from_name(&self.coverage).with_context(|| format!("unknown coverage {:?}", self.coverage))?,
            pairs: self.pairs.resolve()?,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Geometry JSON, relative to the config file.
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_step")]
    pub step_mm: f64,
    /// Eigenbasis size.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default = "default_speed")]
    pub wave_speed_mm_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub qpso: QpsoSection,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_step() -> f64 {
    PLATE_STEP
}
fn default_m() -> usize {
    256
}
fn default_boundary() -> String {
    "neumann".into()
}
fn default_speed() -> f64 {
    DEFAULT_WAVE_SPEED
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            step_mm: default_step(),
            m: default_m(),
            boundary: default_boundary(),
            wave_speed_mm_s: default_speed(),
            seed: 0,
            out: default_out(),
            kernel: KernelConfig::default(),
            qpso: QpsoSection::default(),
            scenarios: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let config: Self = if json { serde_json::from_str(text)? } else { toml::from_str(text)? };
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut config = Self::parse(&text, json).with_context(|| format!("parsing config {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.m >= 1, "m must be at least 1");
        ensure!(self.step_mm > 0.0 && self.step_mm.is_finite(), "step_mm must be positive");
        ensure!(self.wave_speed_mm_s > 0.0, "wave_speed_mm_s must be positive");
        parse_boundary(&self.boundary)?;
        self.kernel.family()?;
        self.kernel.fixed()?;
        if let Some(path) = self.geometry_path() {
            ensure!(path.exists(), "geometry file {} does not exist", path.display());
        }
        for s in &self.scenarios {
            s.spec()?;
        }
        Ok(())
    }

    pub fn geometry_path(&self) -> Option<PathBuf> {
        self.geometry.as_ref().map(|g| if g.is_absolute() { g.clone() } else { self.base_dir.join(g) })
    }

    pub fn geometry_file(&self) -> Result<GeometryFile> {
        match self.geometry_path() {
            Some(path) => GeometryFile::load(&path),
            None => Ok(GeometryFile::preset()),
        }
    }

    pub fn mask(&self) -> Result<GridMask> {
        Ok(bcgp_core::rasterize(&self.geometry_file()?.domain()?, self.step_mm)?)
    }

    pub fn fit_options(&self, seed: u64) -> Result<FitOptions> {
        Ok(FitOptions {
            family: self.kernel.family()?,
            qpso: self.qpso.to_config(seed),
            center_targets: self.kernel.center_targets,
            ..FitOptions::default()
        })
    }
}
