//! Laplacian eigenpairs on gridded domains.
//!
//! The negative Laplacian is discretised with a five-point stencil and
//! ghost-point boundary rows ([`assemble_stencil`]); its smallest eigenpairs
//! form an [`Eigenbasis`] that can be evaluated anywhere in the domain.
//!
//! Eigenvalues are reported as `μ = λ²` of `-∇²φ = λ²φ`, in mm⁻², so a
//! spectral density is evaluated at the angular frequency `√μ`.

mod banded;
mod krylov;
mod stencil;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

pub use stencil::{assemble_interval_stencil, assemble_stencil, StencilMatrix};

use crate::error::{Error, Result};
use crate::geometry::{GridMask, Point};

/// Boundary condition applied on every boundary, outer and hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundarySpec {
    /// Zero normal derivative.
    NeumannZero,
    /// Zero value.
    DirichletZero,
}

/// Uniform 1D lattice of `cells` nodes at `origin + k·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    cells: usize,
    step: f64,
    origin: f64,
}

impl IntervalGrid {
    pub fn new(cells: usize, step: f64, origin: f64) -> Result<Self> {
        if cells < 3 || !(step > 0.0 && step.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidMask(format!(
                "interval needs at least 3 cells and a positive step (got {cells}, {step})"
            )));
        }
        Ok(Self { cells, step, origin })
    }

    /// Cells tiling `[0, length]`; the Neumann faces land on `0` and `length`.
    pub fn tiled(length: f64, step: f64) -> Result<Self> {
        let n = libm::round(length / step);
        if !(n >= 3.0) || (n * step - length).abs() > 1e-9 * length {
            return Err(Error::InvalidMask(format!("{length} is not a whole number of steps {step}")));
        }
        Self::new(n as usize, step, 0.5 * step)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn center(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }

    /// Node positions as points on the x-axis.
    pub fn centers(&self) -> Vec<Point> {
        (0..self.cells).map(|k| Point::new(self.center(k), 0.0)).collect()
    }
}

/// The lattice an eigenbasis lives on.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Interval(IntervalGrid),
    Grid(GridMask),
}

impl Support {
    /// Spatial dimension (1 or 2).
    pub fn dimension(&self) -> usize {
        match self {
            Support::Interval(_) => 1,
            Support::Grid(_) => 2,
        }
    }

    pub fn step(&self) -> f64 {
        match self {
            Support::Interval(g) => g.step(),
            Support::Grid(m) => m.step(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Support::Interval(g) => g.cells(),
            Support::Grid(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight of one node in the discrete inner product (`h` or `h²`).
    pub fn cell_measure(&self) -> f64 {
        self.step().powi(self.dimension() as i32)
    }

    pub fn centers(&self) -> Vec<Point> {
        match self {
            Support::Interval(g) => g.centers(),
            Support::Grid(m) => m.centers(),
        }
    }

    /// Interpolation weights of `p` over node indices, with ghost nodes folded
    /// in according to `bc`.
    ///
    /// Bilinear (linear in 1D) interpolation over the surrounding nodes. A
    /// missing node is a ghost: under Neumann it copies its axis-adjacent
    /// present neighbours (mean of both when two exist, the diagonal node
    /// otherwise); under Dirichlet it is zero. At a node the weight vector is
    /// exactly `[(node, 1.0)]`.
    pub fn interpolation_weights(&self, p: Point, bc: BoundarySpec) -> Option<Vec<(usize, f64)>> {
        match self {
            Support::Interval(g) => interval_weights(g, p.x, bc),
            Support::Grid(mask) => grid_weights(mask, p, bc),
        }
    }
}

fn snap(u: f64) -> f64 {
    let r = libm::round(u);
    if (u - r).abs() < 1e-9 {
        r
    } else {
        u
    }
}

fn interval_weights(g: &IntervalGrid, x: f64, bc: BoundarySpec) -> Option<Vec<(usize, f64)>> {
    if !x.is_finite() {
        return None;
    }
    let u = snap((x - g.origin) / g.step);
    let half = 0.5 + 1e-9;
    if u < -half || u > (g.cells - 1) as f64 + half {
        return None;
    }
    let j0 = libm::floor(u);
    let t = u - j0;
    let j0 = j0 as isize;
    let present = |j: isize| j >= 0 && (j as usize) < g.cells;
    let mut out = Vec::with_capacity(2);
    let corners = [(j0, 1.0 - t), (j0 + 1, t)];
    for (idx, &(j, w)) in corners.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if present(j) {
            out.push((j as usize, w));
        } else if bc == BoundarySpec::NeumannZero {
            let (other, _) = corners[1 - idx];
            out.push((other as usize, w));
        }
    }
    Some(merge(out))
}

fn grid_weights(mask: &GridMask, p: Point, bc: BoundarySpec) -> Option<Vec<(usize, f64)>> {
    mask.locate(p)?;
    let origin = mask.origin();
    let u = snap((p.x - origin.x) / mask.step());
    let v = snap((p.y - origin.y) / mask.step());
    let (c0, r0) = (libm::floor(u), libm::floor(v));
    let (tx, ty) = (u - c0, v - r0);
    let (c0, r0) = (c0 as isize, r0 as isize);
    // corner order: (r0,c0), (r0,c0+1), (r0+1,c0), (r0+1,c0+1)
    let pos = [(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)];
    let weight = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
    let index: [Option<usize>; 4] = core::array::from_fn(|k| mask.index_at(pos[k].0, pos[k].1));
    // axis-adjacent corners: horizontal partner first, then vertical
    const AXIS: [[usize; 2]; 4] = [[1, 2], [0, 3], [3, 0], [2, 1]];
    const DIAGONAL: [usize; 4] = [3, 2, 1, 0];
    let mut out = Vec::with_capacity(4);
    for k in 0..4 {
        if weight[k] == 0.0 {
            continue;
        }
        if let Some(i) = index[k] {
            out.push((i, weight[k]));
            continue;
        }
        if bc == BoundarySpec::DirichletZero {
            continue;
        }
        let partners: Vec<usize> = AXIS[k].iter().filter_map(|&a| index[a]).collect();
        match partners.len() {
            2 => {
                out.push((partners[0], 0.5 * weight[k]));
                out.push((partners[1], 0.5 * weight[k]));
            }
            1 => out.push((partners[0], weight[k])),
            _ => out.push((index[DIAGONAL[k]]?, weight[k])),
        }
    }
    Some(merge(out))
}

fn merge(mut weights: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    weights.sort_by_key(|&(i, _)| i);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    for (i, w) in weights {
        match merged.last_mut() {
            Some((j, acc)) if *j == i => *acc += w,
            _ => merged.push((i, w)),
        }
    }
    merged
}

/// Leading Laplacian eigenpairs on a support.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenbasis {
    support: Support,
    bc: BoundarySpec,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Default residual tolerance `‖Av − μv‖ / ‖v‖` in mm⁻².
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Computes the `m` smallest eigenpairs of `stencil`.
///
/// Eigenvectors are normalised to unit discrete norm `h^d Σ φ²` and signed so
/// that their first non-negligible entry is positive.
pub fn solve_eigenbasis(stencil: &StencilMatrix, m: usize) -> Result<Eigenbasis> {
    let n = stencil.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("at least one eigenpair is required".into()));
    }
    if m > n {
        return Err(Error::MTooLarge { m, n });
    }
    let scale = stencil.scale();
    // Residuals are computed on the integer operator; keep the request above
    // what double precision can resolve for it.
    let floor = 1e3 * f64::EPSILON * stencil.unscaled_norm_bound();
    let tol = (RESIDUAL_TOLERANCE / scale).max(floor);
    let pairs = krylov::smallest_eigenpairs(stencil, m, tol)?;

    let norm = 1.0 / stencil.support().cell_measure().sqrt();
    let mut vectors = pairs.vectors;
    for mut col in vectors.column_iter_mut() {
        let peak = col.amax();
        let lead = col.iter().copied().find(|v| v.abs() > 1e-8 * peak).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        col.scale_mut(sign * norm);
    }
    let eigenvalues = pairs.values.iter().map(|&mu| (mu * scale).max(0.0)).collect();
    Ok(Eigenbasis { support: stencil.support().clone(), bc: stencil.boundary(), eigenvalues, vectors })
}

impl Eigenbasis {
    /// Reassembles a basis from stored parts (e.g. a cache file).
    pub fn from_parts(support: Support, bc: BoundarySpec, eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.nrows() != support.len() || vectors.ncols() != eigenvalues.len() || eigenvalues.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "eigenvector matrix is {}x{}, expected {}x{}",
                vectors.nrows(),
                vectors.ncols(),
                support.len(),
                eigenvalues.len()
            )));
        }
        if eigenvalues.windows(2).any(|w| !(w[0] <= w[1])) || eigenvalues.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("eigenvalues must be non-negative and ascending".into()));
        }
        Ok(Self { support, bc, eigenvalues, vectors })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.bc
    }

    /// `μ_j`, ascending, in mm⁻².
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Gridded eigenfunctions, one column per mode.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Keeps only the first `m` modes.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::MTooLarge { m, n: self.len() });
        }
        Ok(Self {
            support: self.support.clone(),
            bc: self.bc,
            eigenvalues: self.eigenvalues[..m].to_vec(),
            vectors: self.vectors.columns(0, m).into_owned(),
        })
    }

    /// `Φ` with `Φ[p, j] = φ_j(points[p])`.
    pub fn eval_eigenfunctions(&self, points: &[Point]) -> Result<DMatrix<f64>> {
        let m = self.len();
        let mut phi = DMatrix::zeros(points.len(), m);
        for (p, &point) in points.iter().enumerate() {
            let weights = self
                .support
                .interpolation_weights(point, self.bc)
                .ok_or(Error::PointOutsideDomain { index: p })?;
            let (&(first, w0), rest) = weights.split_first().ok_or(Error::PointOutsideDomain { index: p })?;
            for j in 0..m {
                let mut acc = w0 * self.vectors[(first, j)];
                for &(node, w) in rest {
                    acc += w * self.vectors[(node, j)];
                }
                phi[(p, j)] = acc;
            }
        }
        Ok(phi)
    }

    /// Discrete inner product `h^d Σ φ_a φ_b`.
    pub fn inner_product(&self, a: usize, b: usize) -> f64 {
        self.support.cell_measure() * self.vectors.column(a).dot(&self.vectors.column(b))
    }
}

#[cfg(test)]
mod tests;
