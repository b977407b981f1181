//! Boundary-constrained Gaussian process regression for difference-in-time-of-arrival maps.
//!
//! The crate is `no_std` (with `alloc`) and covers the numerical side:
//!
//! * [`geometry`]: plates with holes and their grid masks.
//! * [`laplace_eig`]: the ghost-point Laplacian stencil and its leading eigenpairs.
//! * [`kernels`]: Matérn 3/2 and squared-exponential covariances and spectral densities.
//! * [`gp`]: the full GP, the eigenbasis-constrained reduced-rank GP, and fitting.
//! * [`optimize`]: the QPSO global optimiser.
//! * [`metrics`]: nMSE and MSLL.
//! * [`synth`]: geodesic ΔT ground truth, sensor pairs, and training subsets.
//! * [`localise`]: exhaustive source localisation over fitted pair maps.
#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod gp;
pub mod kernels;
pub mod laplace_eig;
pub mod localise;
pub mod metrics;
pub mod optimize;
pub mod synth;

pub use error::{Error, Result};
pub use nalgebra;
pub use geometry::{boundary_cells, rasterize, BoundaryCells, Cell, DomainGeometry, GridMask, Hole, Point};
pub use gp::{fit, ConstrainedGp, FitOptions, FittedModel, Hyperparams, ModelKind, PredictiveDistribution, StandardGp, TrainingSet};
pub use kernels::{KernelFamily, KernelSpec};
pub use laplace_eig::{assemble_stencil, solve_eigenbasis, BoundarySpec, Eigenbasis, StencilMatrix};
pub use optimize::{qpso_minimize, QpsoConfig, QpsoResult};
