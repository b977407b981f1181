//! Stationary isotropic covariance functions and their spectral densities.

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Matern32,
    SquaredExponential,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Matern32 => "matern32",
            KernelFamily::SquaredExponential => "squared_exponential",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "matern32" | "Matern32" => Some(KernelFamily::Matern32),
            "squared_exponential" | "SquaredExponential" | "se" => Some(KernelFamily::SquaredExponential),
            _ => None,
        }
    }
}

/// A covariance family with signal variance `σ_f²` and lengthscale `l` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    sigma_f2: f64,
    lengthscale: f64,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const NU: f64 = 1.5;

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma_f2: f64, lengthscale: f64) -> Result<Self> {
        if !(sigma_f2 > 0.0 && sigma_f2.is_finite()) {
            return Err(Error::InvalidArgument("signal variance must be positive".into()));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidArgument("lengthscale must be positive".into()));
        }
        Ok(Self { family, sigma_f2, lengthscale })
    }

    pub fn matern32(sigma_f2: f64, lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern32, sigma_f2, lengthscale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma_f2(&self) -> f64 {
        self.sigma_f2
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// `k(r)` at Euclidean lag `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        match self.family {
            KernelFamily::Matern32 => {
                let a = SQRT3 * s;
                self.sigma_f2 * (1.0 + a) * (-a).exp()
            }
            KernelFamily::SquaredExponential => self.sigma_f2 * (-0.5 * s * s).exp(),
        }
    }

    /// Cross-covariance matrix `K[a, b] = k(‖x_a − x'_b‖)`.
    pub fn covariance(&self, xa: &[Point], xb: &[Point]) -> DMatrix<f64> {
        DMatrix::from_fn(xa.len(), xb.len(), |a, b| self.eval(xa[a].distance(&xb[b])))
    }

    /// Spectral density at radial frequency `omega` (mm⁻¹) in `dim` dimensions,
    /// normalised so that `(2π)^{-d} ∫ S(‖ω‖) dω = σ_f²`.
    ///
    /// For the Matérn family this is
    /// `σ_f² 2^d π^{d/2} Γ(ν+d/2) (2ν)^ν / (Γ(ν) l^{2ν}) · (2ν/l² + ω²)^{−(ν+d/2)}`.
    pub fn spectral_density(&self, omega: f64, dim: usize) -> f64 {
        let d = dim as f64;
        let l = self.lengthscale;
        let w2 = omega * omega;
        match self.family {
            KernelFamily::Matern32 => {
                let half_d = 0.5 * d;
                let norm = (2.0 as f64).powf(d) * core::f64::consts::PI.powf(half_d) * libm::tgamma(NU + half_d)
                    * (2.0 * NU).powf(NU)
                    / (libm::tgamma(NU) * l.powf(2.0 * NU));
                self.sigma_f2 * norm * (2.0 * NU / (l * l) + w2).powf(-(NU + half_d))
            }
            KernelFamily::SquaredExponential => {
                let two_pi_l2 = 2.0 * core::f64::consts::PI * l * l;
                self.sigma_f2 * two_pi_l2.powf(0.5 * d) * (-0.5 * l * l * w2).exp()
            }
        }
    }
}
