use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{factor_with_jitter, Factor, Hyperparams, PredictiveDistribution, TrainingSet, LN_2PI};
use crate::error::Result;
use crate::geometry::Point;

/// Full-covariance GP with a cached factor of `K(X, X) + σ_n²I`.
pub struct StandardGp {
    training: TrainingSet,
    hyper: Hyperparams,
    factor: Factor,
    alpha: DVector<f64>,
    nlml: f64,
}

impl core::fmt::Debug for StandardGp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("StandardGp")
            .field("n", &self.training.len())
            .field("hyper", &self.hyper)
            .field("jitter", &self.factor.jitter)
            .finish()
    }
}

impl StandardGp {
    pub fn new(training: TrainingSet, hyper: Hyperparams) -> Result<Self> {
        let x = training.inputs();
        let mut k = hyper.kernel.covariance(x, x);
        for i in 0..x.len() {
            k[(i, i)] += hyper.noise;
        }
        let factor = factor_with_jitter(&k)?;
        let y = DVector::from_column_slice(training.targets());
        let alpha = factor.chol.solve(&y);
        let n = x.len() as f64;
        let nlml = 0.5 * y.dot(&alpha) + 0.5 * factor.log_det() + 0.5 * n * LN_2PI;
        Ok(Self { training, hyper, factor, alpha, nlml })
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    /// `½yᵀ(K+σ_n²I)⁻¹y + ½log|K+σ_n²I| + (N/2)log 2π`.
    pub fn nlml(&self) -> f64 {
        self.nlml
    }

    pub fn predict(&self, points: &[Point]) -> PredictiveDistribution {
        let kernel = &self.hyper.kernel;
        let prior = kernel.eval(0.0);
        if self.training.is_empty() {
            return PredictiveDistribution::from_raw(
                alloc::vec![0.0; points.len()],
                alloc::vec![prior; points.len()],
                kernel.sigma_f2(),
            );
        }
        // K(X, X⋆), one column per test point
        let cross: DMatrix<f64> = kernel.covariance(self.training.inputs(), points);
        let mean: Vec<f64> = cross.tr_mul(&self.alpha).iter().copied().collect();
        let mut v = cross;
        self.factor.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let variance = v.column_iter().map(|c| prior - c.norm_squared()).collect();
        PredictiveDistribution::from_raw(mean, variance, kernel.sigma_f2())
    }
}
