use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{BoundarySpec, IntervalGrid, Support};
use crate::geometry::GridMask;

/// Five-point discretisation of `-∇²` over the 1-cells of a support.
///
/// Entries are stored as small integers (`4`, `-1`, ...) together with a common
/// factor `1/h²`, so symmetry and zero row sums hold bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilMatrix {
    support: Support,
    bc: BoundarySpec,
    scale: f64,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Assembles the negative Laplacian on a 2D mask.
///
/// Interior rows are `(4u - Σ neighbours)/h²`. Under [`BoundarySpec::NeumannZero`]
/// every missing neighbour is a ghost equal to the cell itself, which removes
/// one unit from the diagonal. Under [`BoundarySpec::DirichletZero`] missing
/// neighbours are zero and the diagonal stays at 4.
pub fn assemble_stencil(mask: &GridMask, bc: BoundarySpec) -> StencilMatrix {
    let n = mask.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for (k, cell) in mask.cells().iter().enumerate() {
        let (r, c) = (cell.row as isize, cell.col as isize);
        // Row-major enumeration: up-row neighbour < left < self < right < down-row.
        let below = mask.index_at(r - 1, c);
        let left = mask.index_at(r, c - 1);
        let right = mask.index_at(r, c + 1);
        let above = mask.index_at(r + 1, c);
        let present = [below, left, right, above].iter().filter(|nb| nb.is_some()).count();
        let diag = match bc {
            BoundarySpec::NeumannZero => present as f64,
            BoundarySpec::DirichletZero => 4.0,
        };
        for j in [below, left].into_iter().flatten() {
            col_idx.push(j);
            values.push(-1.0);
        }
        col_idx.push(k);
        values.push(diag);
        for j in [right, above].into_iter().flatten() {
            col_idx.push(j);
            values.push(-1.0);
        }
        row_ptr.push(col_idx.len());
    }
    let h = mask.step();
    StencilMatrix {
        support: Support::Grid(mask.clone()),
        bc,
        scale: 1.0 / (h * h),
        row_ptr,
        col_idx,
        values,
    }
}

/// Three-point analogue of [`assemble_stencil`] on an interval.
pub fn assemble_interval_stencil(grid: &IntervalGrid, bc: BoundarySpec) -> StencilMatrix {
    let n = grid.cells();
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::with_capacity(3 * n);
    let mut values = Vec::with_capacity(3 * n);
    for k in 0..n {
        let present = usize::from(k > 0) + usize::from(k + 1 < n);
        let diag = match bc {
            BoundarySpec::NeumannZero => present as f64,
            BoundarySpec::DirichletZero => 2.0,
        };
        if k > 0 {
            col_idx.push(k - 1);
            values.push(-1.0);
        }
        col_idx.push(k);
        values.push(diag);
        if k + 1 < n {
            col_idx.push(k + 1);
            values.push(-1.0);
        }
        row_ptr.push(col_idx.len());
    }
    let h = grid.step();
    StencilMatrix {
        support: Support::Interval(grid.clone()),
        bc,
        scale: 1.0 / (h * h),
        row_ptr,
        col_idx,
        values,
    }
}

impl StencilMatrix {
    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.bc
    }

    /// The common factor `1/h²` (mm⁻²).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Column indices and unscaled coefficients of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Scaled entry `A[r, c]`.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.iter().position(|&j| j == c).map_or(0.0, |p| self.scale * vals[p])
    }

    pub fn nonzeros_in_row(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    /// `y = (h² A) x`, the integer-coefficient operator.
    pub fn apply_unscaled(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_unscaled(x, y);
        y.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// `A · 1`, accumulated in storage order.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|r| self.scale * self.row(r).1.iter().sum::<f64>())
            .collect()
    }

    /// Exact structural and numerical symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| {
                let (back_cols, back_vals) = self.row(c);
                back_cols
                    .iter()
                    .position(|&j| j == r)
                    .is_some_and(|p| back_vals[p].to_bits() == v.to_bits())
            })
        })
    }

    /// Largest `|r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim())
            .flat_map(|r| self.row(r).0.iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// Gershgorin bound on the spectrum of the unscaled operator.
    pub(crate) fn unscaled_norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dense copy of the scaled matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut dense = DMatrix::zeros(n, n);
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[(r, c)] = self.scale * v;
            }
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, Point};

    fn row_of(s: &StencilMatrix, mask: &GridMask, row: usize, col: usize) -> (f64, usize) {
        let k = mask.index_of(Cell { row, col }).unwrap();
        let off = (0..s.dim()).filter(|&c| c != k && s.entry(k, c) != 0.0).count();
        (s.entry(k, k), off)
    }

    #[test]
    fn neumann_interior_edge_and_corner_rows() {
        let h = 0.5;
        let mask = GridMask::rectangle(4, 5, h, Point::default()).unwrap();
        let s = assemble_stencil(&mask, BoundarySpec::NeumannZero);
        let inv = 1.0 / (h * h);
        assert_eq!(row_of(&s, &mask, 1, 2), (4.0 * inv, 4));
        assert_eq!(row_of(&s, &mask, 0, 2), (3.0 * inv, 3));
        assert_eq!(row_of(&s, &mask, 0, 0), (2.0 * inv, 2));
        let k = mask.index_of(Cell { row: 1, col: 2 }).unwrap();
        let up = mask.index_of(Cell { row: 2, col: 2 }).unwrap();
        assert_eq!(s.entry(k, up), -inv);
    }

    #[test]
    fn dirichlet_keeps_full_diagonal() {
        let mask = GridMask::rectangle(4, 4, 1.0, Point::default()).unwrap();
        let s = assemble_stencil(&mask, BoundarySpec::DirichletZero);
        assert_eq!(row_of(&s, &mask, 0, 0), (4.0, 2));
        assert_eq!(row_of(&s, &mask, 0, 1), (4.0, 3));
    }

    #[test]
    fn symmetric_with_zero_row_sums_around_holes() {
        let mut cells = vec![true; 7 * 9];
        for (r, c) in [(3, 4), (3, 5), (2, 4), (4, 4)] {
            cells[r * 9 + c] = false;
        }
        let mask = GridMask::new(7, 9, cells, 0.3, Point::default()).unwrap();
        let s = assemble_stencil(&mask, BoundarySpec::NeumannZero);
        assert!(s.is_symmetric());
        assert!(s.row_sums().iter().all(|&v| v == 0.0));
        assert!((0..s.dim()).all(|r| s.nonzeros_in_row(r) <= 5));
        assert!(s.bandwidth() <= 9);
        let dense = s.to_dense();
        assert_eq!(dense, dense.transpose());
    }

    #[test]
    fn interval_rows() {
        let grid = IntervalGrid::new(6, 0.25, 0.125).unwrap();
        let s = assemble_interval_stencil(&grid, BoundarySpec::NeumannZero);
        assert_eq!(s.entry(0, 0), 16.0);
        assert_eq!(s.entry(2, 2), 32.0);
        assert_eq!(s.entry(2, 3), -16.0);
        assert!(s.row_sums().iter().all(|&v| v == 0.0));
        let d = assemble_interval_stencil(&grid, BoundarySpec::DirichletZero);
        assert_eq!(d.entry(5, 5), 32.0);
    }
}
