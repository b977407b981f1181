use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::{factor_with_jitter, Factor, Hyperparams, PredictiveDistribution, TrainingSet, LN_2PI};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernels::KernelSpec;
use crate::laplace_eig::Eigenbasis;

/// Reduced-rank GP on a Laplacian eigenbasis.
///
/// With `D = Λ^{1/2}` the inner system is `Z' = D ΦᵀΦ D + σ_n²I`, which equals
/// `D (ΦᵀΦ + σ_n²Λ⁻¹) D` but stays well scaled when high modes have tiny
/// spectral weight.
pub struct ConstrainedGp {
    training: TrainingSet,
    hyper: Hyperparams,
    basis: Arc<Eigenbasis>,
    phi: DMatrix<f64>,
    lambda: Vec<f64>,
    solved: ReducedRank,
}

impl core::fmt::Debug for ConstrainedGp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConstrainedGp")
            .field("n", &self.training.len())
            .field("m", &self.lambda.len())
            .field("hyper", &self.hyper)
            .field("jitter", &self.solved.factor.jitter)
            .finish()
    }
}

pub(crate) struct ReducedRank {
    pub factor: Factor,
    pub sqrt_lambda: Vec<f64>,
    /// `(ΦᵀΦ + σ_n²Λ⁻¹)⁻¹Φᵀy`.
    pub weights: DVector<f64>,
    pub nlml: f64,
}

/// Spectral weights `Λ_j = S(√μ_j)`.
pub(crate) fn spectral_weights(kernel: &KernelSpec, basis: &Eigenbasis) -> Vec<f64> {
    let dim = basis.support().dimension();
    basis
        .eigenvalues()
        .iter()
        .map(|&mu| kernel.spectral_density(mu.max(0.0).sqrt(), dim))
        .collect()
}

/// Solves the reduced-rank system from the sufficient statistics
/// `G = ΦᵀΦ`, `b = Φᵀy` and `yᵀy` of `n` observations.
pub(crate) fn reduced_rank(
    gram: &DMatrix<f64>,
    proj: &DVector<f64>,
    yty: f64,
    n: usize,
    lambda: &[f64],
    noise: f64,
) -> Result<ReducedRank> {
    let m = lambda.len();
    if lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("spectral weights must be finite and non-negative".into()));
    }
    let d: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let mut z = DMatrix::from_fn(m, m, |r, c| d[r] * gram[(r, c)] * d[c]);
    for i in 0..m {
        z[(i, i)] += noise;
    }
    let factor = factor_with_jitter(&z)?;
    let db = DVector::from_fn(m, |j, _| d[j] * proj[j]);
    let u = factor.chol.solve(&db);
    let quad = (yty - db.dot(&u)) / noise;
    let nlml = 0.5 * (n as f64 - m as f64) * noise.ln() + 0.5 * factor.log_det() + 0.5 * n as f64 * LN_2PI + 0.5 * quad;
    let weights = DVector::from_fn(m, |j, _| d[j] * u[j]);
    Ok(ReducedRank { factor, sqrt_lambda: d, weights, nlml })
}

/// Reduced-rank NLML:
/// `½(N−m)log σ_n² + ½Σ log Λ_j + ½log|σ_n²Λ⁻¹ + ΦᵀΦ| + (N/2)log 2π
///  + (yᵀy − yᵀΦ(σ_n²Λ⁻¹ + ΦᵀΦ)⁻¹Φᵀy)/(2σ_n²)`.
pub fn nlml_reduced_rank(phi: &DMatrix<f64>, lambda: &[f64], noise: f64, y: &[f64]) -> Result<f64> {
    check_shapes(phi, lambda, y)?;
    let yv = DVector::from_column_slice(y);
    let gram = phi.tr_mul(phi);
    let proj = phi.tr_mul(&yv);
    Ok(reduced_rank(&gram, &proj, yv.norm_squared(), y.len(), lambda, noise)?.nlml)
}

/// The same quantity through the `N × N` covariance `ΦΛΦᵀ + σ_n²I`; cheaper
/// when `N < m`.
pub fn nlml_reduced_rank_dual(phi: &DMatrix<f64>, lambda: &[f64], noise: f64, y: &[f64]) -> Result<f64> {
    check_shapes(phi, lambda, y)?;
    let scaled = DMatrix::from_fn(phi.nrows(), phi.ncols(), |r, c| phi[(r, c)] * lambda[c]);
    let mut cov = &scaled * phi.transpose();
    for i in 0..y.len() {
        cov[(i, i)] += noise;
    }
    let factor = factor_with_jitter(&cov)?;
    let yv = DVector::from_column_slice(y);
    let alpha = factor.chol.solve(&yv);
    Ok(0.5 * yv.dot(&alpha) + 0.5 * factor.log_det() + 0.5 * y.len() as f64 * LN_2PI)
}

fn check_shapes(phi: &DMatrix<f64>, lambda: &[f64], y: &[f64]) -> Result<()> {
    if phi.nrows() != y.len() || phi.ncols() != lambda.len() {
        return Err(Error::InvalidArgument("Φ must be N × m for N targets and m spectral weights".into()));
    }
    Ok(())
}

impl ConstrainedGp {
    pub fn new(training: TrainingSet, hyper: Hyperparams, basis: Arc<Eigenbasis>) -> Result<Self> {
        let phi = basis.eval_eigenfunctions(training.inputs())?;
        let lambda = spectral_weights(&hyper.kernel, &basis);
        let y = DVector::from_column_slice(training.targets());
        let solved = reduced_rank(&phi.tr_mul(&phi), &phi.tr_mul(&y), y.norm_squared(), training.len(), &lambda, hyper.noise)?;
        Ok(Self { training, hyper, basis, phi, lambda, solved })
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn basis(&self) -> &Arc<Eigenbasis> {
        &self.basis
    }

    /// `Φ = φ_j(x_i)`, `N × m`.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Diagonal of `Λ`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn jitter(&self) -> f64 {
        self.solved.factor.jitter
    }

    pub fn nlml(&self) -> f64 {
        self.solved.nlml
    }

    /// Mean `Φ⋆(ΦᵀΦ + σ_n²Λ⁻¹)⁻¹Φᵀy` and variance
    /// `σ_n² diag Φ⋆(ΦᵀΦ + σ_n²Λ⁻¹)⁻¹Φ⋆ᵀ`.
    pub fn predict(&self, points: &[Point]) -> Result<PredictiveDistribution> {
        let phi_star = self.basis.eval_eigenfunctions(points)?;
        let mean: Vec<f64> = (&phi_star * &self.solved.weights).iter().copied().collect();
        let d = &self.solved.sqrt_lambda;
        let mut b = DMatrix::from_fn(d.len(), points.len(), |j, p| d[j] * phi_star[(p, j)]);
        self.solved.factor.chol.l_dirty().solve_lower_triangular_mut(&mut b);
        let variance = b.column_iter().map(|c| self.hyper.noise * c.norm_squared()).collect();
        Ok(PredictiveDistribution::from_raw(mean, variance, self.hyper.kernel.sigma_f2()))
    }
}
