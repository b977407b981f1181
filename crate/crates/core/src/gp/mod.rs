//! Gaussian process regression with a zero mean function.
//!
//! Two models share one interface:
//!
//! * [`StandardGp`] factorises the full `N × N` covariance `K + σ_n²I`.
//! * [`ConstrainedGp`] expands the covariance in Laplacian eigenfunctions,
//!   `k(x, x') ≈ Σ_j S(√μ_j) φ_j(x) φ_j(x')`, so every posterior mean inherits
//!   the boundary condition of the basis. Training and prediction work on
//!   `m × m` systems only.
//!
//! Hyperparameters are chosen by minimising the negative log marginal
//! likelihood with QPSO, see [`fit`].

mod constrained;
mod fit;
mod standard;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn};
#[allow(unused_imports)]
use num_traits::Float;

pub use constrained::{nlml_reduced_rank, nlml_reduced_rank_dual, ConstrainedGp};
pub use fit::{fit, FitOptions, FittedModel, GpModel, HyperBounds, ModelKind};
pub use standard::StandardGp;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernels::KernelSpec;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub kernel: KernelSpec,
    /// Observation noise variance `σ_n²`.
    pub noise: f64,
}

impl Hyperparams {
    pub fn new(kernel: KernelSpec, noise: f64) -> Result<Self> {
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        Ok(Self { kernel, noise })
    }
}

/// Observed `(x, ΔT)` pairs. Coordinates in mm, targets in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    x: Vec<Point>,
    y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(x: Vec<Point>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        if let Some(i) = x.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("input {i} is not finite")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("target {i} is not finite")));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].x.total_cmp(&x[b].x).then(x[a].y.total_cmp(&x[b].y)));
        if let Some(w) = order.windows(2).find(|w| x[w[0]] == x[w[1]]) {
            return Err(Error::InvalidArgument(format!("inputs {} and {} coincide", w[0].min(w[1]), w[0].max(w[1]))));
        }
        Ok(Self { x, y })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn inputs(&self) -> &[Point] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same inputs with transformed targets.
    pub fn map_targets(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { x: self.x.clone(), y: self.y.iter().map(|&v| f(v)).collect() }
    }
}

/// Pointwise Gaussian predictive marginals of the latent function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Variances that came out below `−1e-10·σ_f²` before clamping to zero.
    pub clamped: usize,
}

impl PredictiveDistribution {
    pub(crate) fn from_raw(mean: Vec<f64>, mut variance: Vec<f64>, sigma_f2: f64) -> Self {
        let mut clamped = 0;
        for v in &mut variance {
            if *v < 0.0 || v.is_nan() {
                if !(*v >= -1e-10 * sigma_f2) {
                    clamped += 1;
                }
                *v = 0.0;
            }
        }
        Self { mean, variance, clamped }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Variance of a new noisy observation.
    pub fn with_noise(&self, noise: f64) -> Vec<f64> {
        self.variance.iter().map(|v| v + noise).collect()
    }
}

pub(crate) struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Cholesky with a diagonal jitter of `1e-10·tr/n`, raised tenfold up to
/// `1e-6·tr/n` before giving up.
pub(crate) fn factor_with_jitter(a: &DMatrix<f64>) -> Result<Factor> {
    let n = a.nrows();
    if n == 0 {
        let chol = Cholesky::new(DMatrix::zeros(0, 0)).ok_or(Error::IllConditioned { jitter: 0.0 })?;
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let base = a.trace() / n as f64;
    if !(base > 0.0 && base.is_finite()) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { jitter: 0.0 });
    }
    let mut level = 1e-10;
    loop {
        let jitter = level * base;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(b) {
            if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok(Factor { chol, jitter });
            }
        }
        if level >= 1e-6 * (1.0 - 1e-9) {
            return Err(Error::IllConditioned { jitter });
        }
        level *= 10.0;
    }
}
