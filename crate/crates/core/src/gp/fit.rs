use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::constrained::{reduced_rank, spectral_weights};
use super::{factor_with_jitter, ConstrainedGp, Hyperparams, PredictiveDistribution, StandardGp, TrainingSet, LN_2PI};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::laplace_eig::Eigenbasis;
use crate::optimize::{qpso_minimize, QpsoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Standard,
    Constrained,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Standard => "standard",
            ModelKind::Constrained => "constrained",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(ModelKind::Standard),
            "constrained" => Some(ModelKind::Constrained),
            _ => None,
        }
    }
}

/// Natural-log search box, in units of the normalised targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub log_sigma_f2: (f64, f64),
    /// `log(l / mm)`.
    pub log_lengthscale: (f64, f64),
    pub log_noise: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            log_sigma_f2: (-6.0, 6.0),
            log_lengthscale: (0.0, 500f64.ln()),
            log_noise: (-12.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub family: KernelFamily,
    /// Swarm settings; the bounds are replaced by [`FitOptions::bounds`].
    pub qpso: QpsoConfig,
    pub bounds: HyperBounds,
    /// Subtract the training mean before fitting.
    pub center_targets: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern32,
            qpso: QpsoConfig::default(),
            bounds: HyperBounds::default(),
            center_targets: false,
        }
    }
}

#[derive(Debug)]
pub enum GpModel {
    Standard(StandardGp),
    Constrained(ConstrainedGp),
}

/// A model with optimised hyperparameters, in the units of the raw targets.
#[derive(Debug)]
pub struct FittedModel {
    model: GpModel,
    offset: f64,
    /// Best NLML per QPSO iteration, on normalised targets.
    pub trace: Vec<f64>,
}

impl FittedModel {
    /// Rebuilds a model from known hyperparameters. `offset` is subtracted
    /// from the targets before conditioning and added back to predictions.
    pub fn from_hyperparams(
        kind: ModelKind,
        training: &TrainingSet,
        basis: Option<Arc<Eigenbasis>>,
        hyper: Hyperparams,
        offset: f64,
    ) -> Result<Self> {
        let shifted = training.map_targets(|v| v - offset);
        let model = match kind {
            ModelKind::Standard => GpModel::Standard(StandardGp::new(shifted, hyper)?),
            ModelKind::Constrained => {
                let basis = basis.ok_or_else(|| Error::InvalidArgument("the constrained model needs an eigenbasis".into()))?;
                GpModel::Constrained(ConstrainedGp::new(shifted, hyper, basis)?)
            }
        };
        Ok(Self { model, offset, trace: Vec::new() })
    }

    pub fn kind(&self) -> ModelKind {
        match self.model {
            GpModel::Standard(_) => ModelKind::Standard,
            GpModel::Constrained(_) => ModelKind::Constrained,
        }
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        match &self.model {
            GpModel::Standard(m) => m.hyperparams(),
            GpModel::Constrained(m) => m.hyperparams(),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// NLML of the centred raw targets.
    pub fn nlml(&self) -> f64 {
        match &self.model {
            GpModel::Standard(m) => m.nlml(),
            GpModel::Constrained(m) => m.nlml(),
        }
    }

    pub fn predict(&self, points: &[Point]) -> Result<PredictiveDistribution> {
        let mut pred = match &self.model {
            GpModel::Standard(m) => {
                if let Some(i) = points.iter().position(|p| !p.is_finite()) {
                    return Err(Error::PointOutsideDomain { index: i });
                }
                m.predict(points)
            }
            GpModel::Constrained(m) => m.predict(points)?,
        };
        if self.offset != 0.0 {
            pred.mean.iter_mut().for_each(|v| *v += self.offset);
        }
        Ok(pred)
    }
}

/// Fits hyperparameters `(log σ_f², log l, log σ_n²)` by QPSO on the NLML.
///
/// Targets are divided by their root mean square before the search so that the
/// default bounds are meaningful whatever the physical unit; the returned
/// variances are rescaled back to raw units.
pub fn fit(kind: ModelKind, training: &TrainingSet, basis: Option<Arc<Eigenbasis>>, options: &FitOptions) -> Result<FittedModel> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if kind == ModelKind::Constrained && basis.is_none() {
        return Err(Error::InvalidArgument("the constrained model needs an eigenbasis".into()));
    }
    let n = training.len();
    let offset = if options.center_targets {
        training.targets().iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let rms = (training.targets().iter().map(|v| (v - offset) * (v - offset)).sum::<f64>() / n as f64).sqrt();
    let scale = if rms > 0.0 && rms.is_finite() { rms } else { 1.0 };
    let y: Vec<f64> = training.targets().iter().map(|v| (v - offset) / scale).collect();

    let b = options.bounds;
    let qpso = options.qpso.clone().with_bounds(vec![b.log_sigma_f2, b.log_lengthscale, b.log_noise]);
    let family = options.family;
    let hyper_at = |theta: &[f64]| -> Result<Hyperparams> {
        Hyperparams::new(KernelSpec::new(family, theta[0].exp(), theta[1].exp())?, theta[2].exp())
    };

    let result = match kind {
        ModelKind::Standard => {
            let objective = StandardObjective::new(training.inputs(), &y);
            qpso_minimize(|theta| hyper_at(theta).and_then(|h| objective.nlml(&h)).unwrap_or(f64::INFINITY), &qpso)?
        }
        ModelKind::Constrained => {
            let basis = basis.as_ref().expect("checked above");
            let objective = ConstrainedObjective::new(basis, training.inputs(), &y)?;
            qpso_minimize(|theta| hyper_at(theta).and_then(|h| objective.nlml(&h)).unwrap_or(f64::INFINITY), &qpso)?
        }
    };

    let best = hyper_at(&result.best_point)?;
    let s2 = scale * scale;
    let raw = Hyperparams::new(KernelSpec::new(family, best.kernel.sigma_f2() * s2, best.kernel.lengthscale())?, best.noise * s2)?;
    let mut fitted = FittedModel::from_hyperparams(kind, training, basis, raw, offset)?;
    fitted.trace = result.trace;
    Ok(fitted)
}

struct StandardObjective<'a> {
    distances: DMatrix<f64>,
    y: &'a [f64],
}

impl<'a> StandardObjective<'a> {
    fn new(x: &[Point], y: &'a [f64]) -> Self {
        Self { distances: DMatrix::from_fn(x.len(), x.len(), |a, b| x[a].distance(&x[b])), y }
    }

    fn nlml(&self, hyper: &Hyperparams) -> Result<f64> {
        let n = self.y.len();
        let mut k = self.distances.map(|r| hyper.kernel.eval(r));
        for i in 0..n {
            k[(i, i)] += hyper.noise;
        }
        let factor = factor_with_jitter(&k)?;
        let y = DVector::from_column_slice(self.y);
        let alpha = factor.chol.solve(&y);
        Ok(0.5 * y.dot(&alpha) + 0.5 * factor.log_det() + 0.5 * n as f64 * LN_2PI)
    }
}

struct ConstrainedObjective<'a> {
    basis: &'a Eigenbasis,
    phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    proj: DVector<f64>,
    y: &'a [f64],
}

impl<'a> ConstrainedObjective<'a> {
    fn new(basis: &'a Eigenbasis, x: &[Point], y: &'a [f64]) -> Result<Self> {
        let phi = basis.eval_eigenfunctions(x)?;
        let gram = phi.tr_mul(&phi);
        let proj = phi.tr_mul(&DVector::from_column_slice(y));
        Ok(Self { basis, phi, gram, proj, y })
    }

    fn nlml(&self, hyper: &Hyperparams) -> Result<f64> {
        let lambda = spectral_weights(&hyper.kernel, self.basis);
        if self.y.len() < lambda.len() {
            super::nlml_reduced_rank_dual(&self.phi, &lambda, hyper.noise, self.y)
        } else {
            let yty = self.y.iter().map(|v| v * v).sum();
            Ok(reduced_rank(&self.gram, &self.proj, yty, self.y.len(), &lambda, hyper.noise)?.nlml)
        }
    }
}
