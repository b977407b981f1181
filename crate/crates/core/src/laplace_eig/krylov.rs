//! Smallest eigenpairs of a stencil by shift-invert block Krylov iteration.
//!
//! The Krylov space of `(h²A + τI)⁻¹` is built in blocks with full
//! re-orthogonalisation, so repeated eigenvalues (square domains) are resolved
//! as long as their multiplicity does not exceed the block size. Converged
//! Ritz vectors are refined by a final Rayleigh-Ritz step with `h²A` itself and
//! accepted only when their true residual meets the tolerance.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::banded::BandedCholesky;
use super::StencilMatrix;
use crate::error::{Error, Result};

/// Below this many unknowns a dense symmetric eigendecomposition is cheaper.
const DENSE_LIMIT: usize = 600;
const BLOCK: usize = 8;
const SHIFT_REL: f64 = 1e-4;
const SEED: u64 = 0x6c61_706c_6163_65;

pub(crate) struct Eigenpairs {
    /// Ascending eigenvalues of the unscaled operator `h²A`.
    pub values: Vec<f64>,
    /// Euclidean-orthonormal eigenvectors, one per column.
    pub vectors: DMatrix<f64>,
}

/// `tol` bounds `‖h²A v − μ v‖` for unit `v`.
pub(crate) fn smallest_eigenpairs(stencil: &StencilMatrix, m: usize, tol: f64) -> Result<Eigenpairs> {
    let n = stencil.dim();
    if n <= DENSE_LIMIT || 3 * (m + 2 * BLOCK) >= n {
        return dense(stencil, m);
    }
    krylov(stencil, m, tol)
}

pub(crate) fn dense(stencil: &StencilMatrix, m: usize) -> Result<Eigenpairs> {
    let n = stencil.dim();
    let mut a = DMatrix::zeros(n, n);
    for r in 0..n {
        let (cols, vals) = stencil.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            a[(r, c)] = v;
        }
    }
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::SolverFailure("dense eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, m, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigenpairs { values, vectors })
}

fn krylov(stencil: &StencilMatrix, m: usize, tol: f64) -> Result<Eigenpairs> {
    let n = stencil.dim();
    let shift = SHIFT_REL * stencil.unscaled_norm_bound();
    let chol = BandedCholesky::factor(stencil, shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let max_dim = (n / BLOCK) * BLOCK;
    let mut basis: Vec<f64> = Vec::with_capacity(n * (4 * m).min(max_dim));
    let mut proj = DMatrix::<f64>::zeros(0, 0);
    let mut k = 0;
    let mut next_check = m + 2 * BLOCK;

    let mut block = DMatrix::from_fn(n, BLOCK, |_, _| rng.random::<f64>() - 0.5);
    orthonormalise(&basis, k, n, &mut block, &mut rng);

    loop {
        basis.extend_from_slice(block.as_slice());
        let mut image = block.clone();
        for mut col in image.column_iter_mut() {
            chol.solve_in_place(col.as_mut_slice());
        }
        k += BLOCK;
        let v = DMatrixView::from_slice(&basis, n, k);
        let coeffs = v.tr_mul(&image);
        proj = proj.resize(k, k, 0.0);
        for c in 0..BLOCK {
            for i in 0..k {
                proj[(i, k - BLOCK + c)] = coeffs[(i, c)];
                proj[(k - BLOCK + c, i)] = coeffs[(i, c)];
            }
        }

        let exhausted = k + BLOCK > max_dim;
        if k >= next_check || exhausted {
            if let Some(pairs) = rayleigh_ritz(stencil, &basis, n, k, &proj, m, tol) {
                return Ok(pairs);
            }
            next_check = k + (k / 8).max(2 * BLOCK);
        }
        if exhausted {
            return Err(Error::SolverFailure(format!(
                "{m} eigenpairs did not converge within a Krylov space of dimension {k}"
            )));
        }

        image -= v * coeffs;
        orthonormalise(&basis, k, n, &mut image, &mut rng);
        block = image;
    }
}

/// Orthogonalises `block` against the first `k` basis columns and itself.
/// Columns that collapse are replaced by fresh random directions.
fn orthonormalise(basis: &[f64], k: usize, n: usize, block: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let v = DMatrixView::from_slice(&basis[..n * k], n, k);
    if k > 0 {
        let c = v.tr_mul(block);
        *block -= v * c;
        let c = v.tr_mul(block);
        *block -= v * c;
    }
    for j in 0..block.ncols() {
        let mut attempts = 0;
        loop {
            let before = block.column(j).norm();
            for _ in 0..2 {
                for i in 0..j {
                    let r = block.column(i).dot(&block.column(j));
                    let prev = block.column(i).clone_owned();
                    block.column_mut(j).axpy(-r, &prev, 1.0);
                }
                if k > 0 {
                    let c = v.tr_mul(&block.column(j));
                    let corr = v * c;
                    block.column_mut(j).axpy(-1.0, &corr, 1.0);
                }
            }
            let after = block.column(j).norm();
            if after > 1e-8 * before && after > 1e-300 {
                block.column_mut(j).scale_mut(1.0 / after);
                break;
            }
            attempts += 1;
            assert!(attempts < 16, "cannot extend an orthonormal basis of dimension {}", k + j);
            for x in block.column_mut(j).iter_mut() {
                *x = rng.random::<f64>() - 0.5;
            }
        }
    }
}

fn rayleigh_ritz(
    stencil: &StencilMatrix,
    basis: &[f64],
    n: usize,
    k: usize,
    proj: &DMatrix<f64>,
    m: usize,
    tol: f64,
) -> Option<Eigenpairs> {
    let sym = (proj + proj.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)?;
    let mut order: Vec<usize> = (0..k).collect();
    // largest eigenvalues of the inverse are the smallest of the stencil
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let p = (m + BLOCK).min(k);
    let select = DMatrix::from_fn(k, p, |r, c| eig.eigenvectors[(r, order[c])]);
    let v = DMatrixView::from_slice(basis, n, k);
    let ritz = v * select;

    let mut image = DMatrix::zeros(n, p);
    for c in 0..p {
        let col = ritz.column(c);
        stencil.apply_unscaled(col.as_slice(), image.column_mut(c).as_mut_slice());
    }
    let gram = ritz.tr_mul(&image);
    let gram = (&gram + gram.transpose()) * 0.5;
    let inner = SymmetricEigen::try_new(gram, f64::EPSILON, 0)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| inner.eigenvalues[i].total_cmp(&inner.eigenvalues[j]));
    let rot = DMatrix::from_fn(p, m, |r, c| inner.eigenvectors[(r, order[c])]);
    let vectors = &ritz * &rot;
    let images = &image * &rot;
    let values: Vec<f64> = order[..m].iter().map(|&i| inner.eigenvalues[i]).collect();
    for (c, &mu) in values.iter().enumerate() {
        let residual = (images.column(c) - vectors.column(c) * mu).norm();
        if !(residual <= tol) {
            return None;
        }
    }
    Some(Eigenpairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::geometry::{GridMask, Point};
    use crate::laplace_eig::{assemble_stencil, BoundarySpec};

    #[test]
    fn krylov_matches_dense_on_holed_mask() {
        let (rows, cols) = (30, 26);
        let mut cells = vec![true; rows * cols];
        for r in 10..16 {
            for c in 8..13 {
                cells[r * cols + c] = false;
            }
        }
        let mask = GridMask::new(rows, cols, cells, 1.0, Point::default()).unwrap();
        let s = assemble_stencil(&mask, BoundarySpec::NeumannZero);
        let m = 40;
        let fast = krylov(&s, m, 1e-10).unwrap();
        let reference = dense(&s, m).unwrap();
        for (a, b) in fast.values.iter().zip(&reference.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let gram = fast.vectors.tr_mul(&fast.vectors);
        assert!((gram - DMatrix::identity(m, m)).abs().max() < 1e-12);
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        let mask = GridMask::rectangle(32, 32, 1.0, Point::default()).unwrap();
        let s = assemble_stencil(&mask, BoundarySpec::NeumannZero);
        let fast = krylov(&s, 30, 1e-10).unwrap();
        let reference = dense(&s, 30).unwrap();
        for (a, b) in fast.values.iter().zip(&reference.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
