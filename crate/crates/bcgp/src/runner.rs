//! Scenario runner: fits both models for every sensor pair of every scenario
//! and writes metrics and squared-error-difference maps.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use bcgp_core::laplace_eig::assemble_stencil;
use bcgp_core::metrics::MetricReport;
use bcgp_core::synth::{delta_t_from_distances, sensor_distances, subsample_training, DeltaTField, ScenarioSpec, SensorArray};
use bcgp_core::{fit, solve_eigenbasis, BoundarySpec, Eigenbasis, FittedModel, GridMask, ModelKind, Point, TrainingSet};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::formats::{
    boundary_name, mask_hash, parse_boundary, read_eigencache, read_eigencache_header, write_eigencache, write_field_csv,
    write_metrics_csv, BasisRef, FieldRow, GeometryFile, MetricsRow, ModelFile, MODEL_VERSION,
};

/// Loads a cached eigenbasis for `mask` when one with at least `m` modes and
/// the same boundary condition exists at `cache`; otherwise solves and, if a
/// path was given, writes the cache.
pub fn obtain_basis(mask: &GridMask, bc: BoundarySpec, m: usize, cache: Option<&Path>) -> Result<Eigenbasis> {
    if let Some(path) = cache.filter(|p| p.exists()) {
        let header = read_eigencache_header(path)?;
        if header.mask_hash == mask_hash(mask) && header.boundary == bc && header.m >= m {
            let basis = read_eigencache(path, mask)?;
            return Ok(if basis.len() > m { basis.truncated(m)? } else { basis });
        }
    }
    let basis = solve_eigenbasis(&assemble_stencil(mask, bc), m)?;
    if let Some(path) = cache {
        write_eigencache(path, &basis)?;
    }
    Ok(basis)
}

/// Everything shared by the scenarios of one configuration.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub geometry: GeometryFile,
    pub mask: GridMask,
    pub sensors: SensorArray,
    /// Geodesic distance field of each sensor.
    pub distances: Vec<Vec<f64>>,
    /// Absent when only synthetic data or standard models are needed.
    pub basis: Option<Arc<Eigenbasis>>,
    pub eigencache: Option<PathBuf>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig, eigencache: Option<&Path>) -> Result<Self> {
        let mut exp = Self::prepare_data(config)?;
        let bc = parse_boundary(&exp.config.boundary)?;
        exp.basis = Some(Arc::new(obtain_basis(&exp.mask, bc, exp.config.m, eigencache)?));
        exp.eigencache = eigencache.map(Path::to_path_buf);
        Ok(exp)
    }

    /// Geometry, mask and sensor distances, without the eigenbasis.
    pub fn prepare_data(config: ExperimentConfig) -> Result<Self> {
        let geometry = config.geometry_file()?;
        let mask = bcgp_core::rasterize(&geometry.domain()?, config.step_mm)?;
        let sensors = geometry.sensor_array()?;
        let distances = sensor_distances(&mask, &sensors)?;
        Ok(Self { config, geometry, mask, sensors, distances, basis: None, eigencache: None })
    }

    pub fn field(&self, pair: usize) -> Result<DeltaTField> {
        Ok(delta_t_from_distances(&self.distances, pair, self.config.wave_speed_mm_s)?)
    }

    pub fn test_points(&self) -> Vec<Point> {
        self.mask.centers()
    }

    /// Fits (or, with fixed hyperparameters, conditions) one model.
    pub fn fit_model(&self, kind: ModelKind, training: &TrainingSet, seed: u64) -> Result<FittedModel> {
        let basis = match kind {
            ModelKind::Standard => None,
            ModelKind::Constrained => Some(self.basis.clone().context("the constrained model needs the eigenbasis")?),
        };
        if let Some(hyper) = self.config.kernel.fixed()? {
            let offset = if self.config.kernel.center_targets {
                training.targets().iter().sum::<f64>() / training.len().max(1) as f64
            } else {
                0.0
            };
            return Ok(FittedModel::from_hyperparams(kind, training, basis, hyper, offset)?);
        }
        Ok(fit(kind, training, basis, &self.config.fit_options(seed)?)?)
    }

    /// Reference to the eigenbasis for model files; `None` without a basis.
    pub fn basis_ref(&self) -> Option<BasisRef> {
        let basis = self.basis.as_ref()?;
        Some(BasisRef {
            geometry: self.geometry.clone(),
            step_mm: self.config.step_mm,
            m: basis.len(),
            boundary: boundary_name(basis.boundary()).into(),
            mask_sha256: hex::encode(mask_hash(&self.mask)),
            eigencache: self.eigencache.as_ref().map(|p| p.display().to_string()),
        })
    }
}

/// Deterministic per-fit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Short hash of everything that determines a scenario's outputs.
pub fn scenario_id(config: &ExperimentConfig, mask: &GridMask, spec: &ScenarioSpec) -> String {
    let mut h = Sha256::new();
    h.update(mask_hash(mask));
    let settings = serde_json::json!({
        "step_mm": config.step_mm,
        "m": config.m,
        "boundary": config.boundary,
        "wave_speed_mm_s": config.wave_speed_mm_s,
        "seed": config.seed,
        "kernel": config.kernel,
        "qpso": config.qpso,
        "spacing_mm": spec.spacing,
        "boundary_mode": spec.boundary_mode.name(),
        "coverage": spec.coverage.name(),
        "pairs": spec.pairs,
        "scenario_seed": spec.seed,
    });
    h.update(settings.to_string().as_bytes());
    hex::encode(&h.finalize()[..6])
}

pub struct PairOutcome {
    pub pair: usize,
    pub rows: [MetricsRow; 2],
    /// Standard minus constrained squared error at each test point.
    pub sqerr_diff: Vec<f64>,
}

pub struct ScenarioOutcome {
    pub id: String,
    pub spec: ScenarioSpec,
    pub pairs: Vec<PairOutcome>,
}

impl ScenarioOutcome {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.pairs.iter().flat_map(|p| p.rows.iter().cloned()).collect()
    }

    /// Mean nMSE of one model over the scenario's pairs.
    pub fn mean_nmse(&self, kind: ModelKind) -> f64 {
        let rows: Vec<f64> = self.rows().iter().filter(|r| r.model == kind.name()).map(|r| r.nmse).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    }
}

fn run_pair(exp: &Experiment, spec: &ScenarioSpec, pair: usize, test: &[Point]) -> Result<PairOutcome> {
    let field = exp.field(pair)?;
    let training = subsample_training(&field, &exp.mask, spec)?;
    let mut reports = Vec::with_capacity(2);
    for kind in [ModelKind::Standard, ModelKind::Constrained] {
        let seed = derive_seed(&[exp.config.seed, exp.config.qpso.seed, spec.seed, pair as u64, kind as u64]);
        let model = exp.fit_model(kind, &training, seed).with_context(|| format!("fitting the {} model", kind.name()))?;
        let pred = model.predict(test)?;
        let noisy = pred.with_noise(model.hyperparams().noise);
        let report = MetricReport::evaluate(&pred.mean, &noisy, &field.values, training.targets())?;
        reports.push((kind, report));
    }
    let sqerr_diff = reports[0].1.sq_errors.iter().zip(&reports[1].1.sq_errors).map(|(s, c)| s - c).collect();
    let row = |(kind, r): &(ModelKind, MetricReport)| MetricsRow {
        pair_index: pair,
        spacing_mm: spec.spacing,
        boundary_mode: spec.boundary_mode.name().into(),
        coverage: spec.coverage.name().into(),
        model: kind.name().into(),
        nmse: r.nmse,
        msll: r.msll,
        n_train: training.len(),
        n_test: r.n_test,
    };
    Ok(PairOutcome { pair, rows: [row(&reports[0]), row(&reports[1])], sqerr_diff })
}

/// Runs one scenario; pairs are processed in parallel.
pub fn run_scenario(exp: &Experiment, spec: &ScenarioSpec) -> Result<ScenarioOutcome> {
    spec.validate()?;
    let id = scenario_id(&exp.config, &exp.mask, spec);
    let test = exp.test_points();
    let pairs = spec
        .pairs
        .par_iter()
        .map(|&pair| run_pair(exp, spec, pair, &test).with_context(|| format!("scenario {id}, pair {pair}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioOutcome { id, spec: spec.clone(), pairs })
}

/// Runs every configured scenario and writes `out/metrics.csv`,
/// `out/<scenario-id>/metrics.csv` and `out/<scenario-id>/pair-<k>-sqerr-diff.csv`.
pub fn run_scenarios(exp: &Experiment, out: &Path) -> Result<Vec<ScenarioOutcome>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let test = exp.test_points();
    let mut outcomes = Vec::new();
    for scenario in &exp.config.scenarios {
        let spec = scenario.spec()?;
        let outcome = run_scenario(exp, &spec)?;
        let dir = out.join(&outcome.id);
        std::fs::create_dir_all(&dir)?;
        write_metrics_csv(&dir.join("metrics.csv"), &outcome.rows())?;
        std::fs::write(dir.join("scenario.json"), serde_json::to_string_pretty(scenario)?)?;
        for p in &outcome.pairs {
            write_sqerr_csv(&dir.join(format!("pair-{}-sqerr-diff.csv", p.pair)), &test, &p.sqerr_diff)?;
        }
        outcomes.push(outcome);
    }
    let all: Vec<MetricsRow> = outcomes.iter().flat_map(ScenarioOutcome::rows).collect();
    write_metrics_csv(&out.join("metrics.csv"), &all)?;
    Ok(outcomes)
}

fn write_sqerr_csv(path: &Path, points: &[Point], diff: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x_mm", "y_mm", "sqerr_diff"])?;
    for (p, d) in points.iter().zip(diff) {
        w.write_record([p.x.to_string(), p.y.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialisable form of a fitted model.
pub fn model_file(model: &FittedModel, pair: Option<usize>, basis: Option<BasisRef>) -> ModelFile {
    let h = model.hyperparams();
    let training = match model.model() {
        bcgp_core::gp::GpModel::Standard(m) => m.training(),
        bcgp_core::gp::GpModel::Constrained(m) => m.training(),
    };
    ModelFile {
        version: MODEL_VERSION,
        kind: model.kind().name().into(),
        pair,
        family: h.kernel.family().name().into(),
        sigma_f2: h.kernel.sigma_f2(),
        lengthscale_mm: h.kernel.lengthscale(),
        noise_var: h.noise,
        offset: model.offset(),
        training: training
            .inputs()
            .iter()
            .zip(training.targets())
            .map(|(p, &v)| FieldRow { x_mm: p.x, y_mm: p.y, dt_s: v + model.offset() })
            .collect(),
        basis: (model.kind() == ModelKind::Constrained).then_some(basis).flatten(),
    }
}

/// Rebuilds models from their files, sharing eigenbases between models that
/// reference the same one.
#[derive(Default)]
pub struct ModelLoader {
    eigencache: Option<PathBuf>,
    bases: Vec<(String, String, usize, Arc<Eigenbasis>)>,
}

impl ModelLoader {
    pub fn new(eigencache: Option<&Path>) -> Self {
        Self { eigencache: eigencache.map(Path::to_path_buf), bases: Vec::new() }
    }

    pub fn load(&mut self, file: &ModelFile) -> Result<FittedModel> {
        let basis = match &file.basis {
            Some(b) if file.kind()? == ModelKind::Constrained => {
                let known = self
                    .bases
                    .iter()
                    .find(|(hash, bc, m, _)| *hash == b.mask_sha256 && *bc == b.boundary && *m >= b.m);
                Some(match known {
                    Some((.., basis)) if basis.len() == b.m => basis.clone(),
                    Some((.., basis)) => Arc::new(basis.truncated(b.m)?),
                    None => {
                        let basis = Arc::new(resolve_basis(b, self.eigencache.as_deref())?);
                        self.bases.push((b.mask_sha256.clone(), b.boundary.clone(), b.m, basis.clone()));
                        basis
                    }
                })
            }
            _ => None,
        };
        build_model(file, basis)
    }
}

fn resolve_basis(b: &BasisRef, eigencache: Option<&Path>) -> Result<Eigenbasis> {
    let mask = bcgp_core::rasterize(&b.geometry.domain()?, b.step_mm)?;
    anyhow::ensure!(hex::encode(mask_hash(&mask)) == b.mask_sha256, "model basis mask hash does not match its geometry");
    let cache = eigencache.map(Path::to_path_buf).or_else(|| b.eigencache.as_ref().map(PathBuf::from));
    obtain_basis(&mask, parse_boundary(&b.boundary)?, b.m, cache.as_deref())
}

/// Rebuilds a model from its file, recomputing or loading its eigenbasis.
pub fn load_model(file: &ModelFile, eigencache: Option<&Path>) -> Result<FittedModel> {
    ModelLoader::new(eigencache).load(file)
}

fn build_model(file: &ModelFile, basis: Option<Arc<Eigenbasis>>) -> Result<FittedModel> {
    let kind = file.kind()?;
    let hyper = bcgp_core::Hyperparams::new(
        bcgp_core::KernelSpec::new(file.family()?, file.sigma_f2, file.lengthscale_mm)?,
        file.noise_var,
    )?;
    let training = TrainingSet::new(
        file.training.iter().map(|r| Point::new(r.x_mm, r.y_mm)).collect(),
        file.training.iter().map(|r| r.dt_s).collect(),
    )?;
    anyhow::ensure!(kind == ModelKind::Standard || basis.is_some(), "constrained model file has no basis reference");
    Ok(FittedModel::from_hyperparams(kind, &training, basis, hyper, file.offset)?)
}

/// Writes a field CSV over the cells of `mask`.
pub fn write_mask_field(path: &Path, mask: &GridMask, values: &[f64]) -> Result<()> {
    write_field_csv(path, &mask.centers(), values)
}
