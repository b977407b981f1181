use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::StencilMatrix;
use crate::error::{Error, Result};

/// Cholesky factor of `h²A + shift·I` in lower band storage.
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    width: usize,
    // row i holds L[i, i-width ..= i], left-padded with zeros
    band: Vec<f64>,
}

impl BandedCholesky {
    pub(crate) fn factor(stencil: &StencilMatrix, shift: f64) -> Result<Self> {
        let n = stencil.dim();
        let width = stencil.bandwidth();
        let stride = width + 1;
        let mut band = vec![0.0; n * stride];
        for r in 0..n {
            let (cols, vals) = stencil.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    band[r * stride + (c + width - r)] = v;
                }
            }
            band[r * stride + width] += shift;
        }
        for i in 0..n {
            let lo = i.saturating_sub(width);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(width));
                let mut s = band[i * stride + (j + width - i)];
                for k in klo..j {
                    s -= band[i * stride + (k + width - i)] * band[j * stride + (k + width - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::SolverFailure(format!(
                            "shifted stencil is not positive definite at row {i}"
                        )));
                    }
                    band[i * stride + width] = s.sqrt();
                } else {
                    band[i * stride + (j + width - i)] = s / band[j * stride + width];
                }
            }
        }
        Ok(Self { n, width, band })
    }

    /// Overwrites `x` with `(h²A + shift·I)⁻¹ x`.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, w, stride) = (self.n, self.width, self.width + 1);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = x[i];
            for k in lo..i {
                s -= self.band[i * stride + (k + w - i)] * x[k];
            }
            x[i] = s / self.band[i * stride + w];
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.band[k * stride + (i + w - k)] * x[k];
            }
            x[i] = s / self.band[i * stride + w];
        }
    }
}
