use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::*;
use crate::geometry::Cell;

/// Analytic spectrum of `-∇²` on `[0, lx] x [0, ly]`, ascending.
fn rectangle_spectrum(lx: f64, ly: f64, bc: BoundarySpec, count: usize) -> Vec<f64> {
    let start = match bc {
        BoundarySpec::NeumannZero => 0,
        BoundarySpec::DirichletZero => 1,
    };
    let mut out = Vec::new();
    for a in start..40 {
        for b in start..40 {
            let (fa, fb) = (a as f64 * PI / lx, b as f64 * PI / ly);
            out.push(fa * fa + fb * fb);
        }
    }
    out.sort_by(f64::total_cmp);
    out.truncate(count);
    out
}

fn neumann_square(h: f64, m: usize) -> Eigenbasis {
    let mask = GridMask::tiled_rectangle(1.0, 1.0, h).unwrap();
    solve_eigenbasis(&assemble_stencil(&mask, BoundarySpec::NeumannZero), m).unwrap()
}

#[test]
fn unit_square_neumann_spectrum() {
    let basis = neumann_square(1.0 / 64.0, 11);
    let exact = rectangle_spectrum(1.0, 1.0, BoundarySpec::NeumannZero, 11);
    assert!(basis.eigenvalues()[0].abs() < 1e-6);
    assert!((basis.eigenvalues()[1] - PI * PI).abs() / (PI * PI) < 0.01);
    for (mu, e) in basis.eigenvalues().iter().zip(&exact).skip(1) {
        assert!((mu - e).abs() / e < 0.01, "{mu} vs {e}");
    }
}

#[test]
fn unit_square_dirichlet_ground_state() {
    let mask = GridMask::interior_nodes(1.0, 1.0, 1.0 / 64.0).unwrap();
    let basis = solve_eigenbasis(&assemble_stencil(&mask, BoundarySpec::DirichletZero), 1).unwrap();
    let exact = 2.0 * PI * PI;
    assert!((basis.eigenvalues()[0] - exact).abs() / exact < 0.01);
}

#[test]
fn long_rectangle_second_mode() {
    let mask = GridMask::tiled_rectangle(2.0, 1.0, 1.0 / 32.0).unwrap();
    let basis = solve_eigenbasis(&assemble_stencil(&mask, BoundarySpec::NeumannZero), 3).unwrap();
    let exact = (PI / 2.0) * (PI / 2.0);
    assert!((basis.eigenvalues()[1] - exact).abs() / exact < 0.01);
}

#[test]
fn eigenvalue_error_shrinks_under_refinement() {
    let exact = rectangle_spectrum(1.0, 1.0, BoundarySpec::NeumannZero, 8);
    let errors: Vec<Vec<f64>> = [8.0, 16.0, 32.0]
        .iter()
        .map(|&n| {
            let basis = neumann_square(1.0 / n, 8);
            basis.eigenvalues()[1..].iter().zip(&exact[1..]).map(|(mu, e)| (mu - e).abs()).collect()
        })
        .collect();
    for level in 0..2 {
        for (coarse, fine) in errors[level].iter().zip(&errors[level + 1]) {
            assert!(coarse / fine >= 2.0, "error ratio {}", coarse / fine);
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal_and_signed() {
    let mut cells = vec![true; 24 * 30];
    for r in 8..14 {
        for c in 10..17 {
            cells[r * 30 + c] = false;
        }
    }
    let mask = GridMask::new(24, 30, cells, 2.5, Point::default()).unwrap();
    let basis = solve_eigenbasis(&assemble_stencil(&mask, BoundarySpec::NeumannZero), 20).unwrap();
    for a in 0..20 {
        for b in 0..20 {
            let expected = if a == b { 1.0 } else { 0.0 };
            assert!((basis.inner_product(a, b) - expected).abs() < 1e-8);
        }
        let col = basis.vectors().column(a);
        let peak = col.amax();
        let lead = col.iter().find(|v| v.abs() > 1e-8 * peak).unwrap();
        assert!(*lead > 0.0);
    }
    assert!(basis.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    assert!(basis.eigenvalues()[0] < 1e-10);
    // constant mode
    let c0 = basis.vectors().column(0);
    assert!(c0.iter().all(|v| (v - c0[0]).abs() < 1e-8));
}

#[test]
fn residual_contract_holds() {
    let mask = GridMask::rectangle(40, 36, 5.0, Point::default()).unwrap();
    let stencil = assemble_stencil(&mask, BoundarySpec::NeumannZero);
    let basis = solve_eigenbasis(&stencil, 24).unwrap();
    let n = stencil.dim();
    let mut image = vec![0.0; n];
    for j in 0..24 {
        let v: Vec<f64> = basis.vectors().column(j).iter().copied().collect();
        stencil.apply(&v, &mut image);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res = image
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - basis.eigenvalues()[j] * x).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= RESIDUAL_TOLERANCE * norm, "mode {j}: {res}");
    }
}

#[test]
fn too_many_modes() {
    let mask = GridMask::rectangle(3, 3, 1.0, Point::default()).unwrap();
    let s = assemble_stencil(&mask, BoundarySpec::NeumannZero);
    assert_eq!(solve_eigenbasis(&s, 10), Err(Error::MTooLarge { m: 10, n: 9 }));
}

fn small_basis() -> (GridMask, Eigenbasis) {
    let mut cells = vec![true; 8 * 8];
    cells[4 * 8 + 4] = false;
    let mask = GridMask::new(8, 8, cells, 2.0, Point::new(1.0, 1.0)).unwrap();
    let basis = solve_eigenbasis(&assemble_stencil(&mask, BoundarySpec::NeumannZero), 6).unwrap();
    (mask, basis)
}

#[test]
fn evaluation_at_nodes_is_exact() {
    let (mask, basis) = small_basis();
    let phi = basis.eval_eigenfunctions(&mask.centers()).unwrap();
    for k in 0..mask.len() {
        for j in 0..basis.len() {
            assert_eq!(phi[(k, j)].to_bits(), basis.vectors()[(k, j)].to_bits());
        }
    }
}

#[test]
fn evaluation_between_nodes_is_the_mean() {
    let (mask, basis) = small_basis();
    let a = mask.index_of(Cell { row: 2, col: 2 }).unwrap();
    let b = mask.index_of(Cell { row: 2, col: 3 }).unwrap();
    let mid = Point::new(0.5 * (mask.center(mask.cells()[a]).x + mask.center(mask.cells()[b]).x), mask.center(mask.cells()[a]).y);
    let phi = basis.eval_eigenfunctions(&[mid]).unwrap();
    for j in 0..basis.len() {
        let expected = 0.5 * (basis.vectors()[(a, j)] + basis.vectors()[(b, j)]);
        assert!((phi[(0, j)] - expected).abs() < 1e-14);
    }
}

#[test]
fn evaluation_in_a_hole_fails() {
    let (mask, basis) = small_basis();
    let hole = mask.center(Cell { row: 4, col: 4 });
    let inside = mask.center(Cell { row: 0, col: 0 });
    assert_eq!(basis.eval_eigenfunctions(&[inside, hole]), Err(Error::PointOutsideDomain { index: 1 }));
    assert!(basis.eval_eigenfunctions(&[Point::new(-5.0, 0.0)]).is_err());
}

#[test]
fn neumann_ghosts_flatten_the_edge_margin() {
    let (mask, basis) = small_basis();
    let edge = mask.center(Cell { row: 3, col: 0 });
    let face = Point::new(edge.x - 0.5 * mask.step(), edge.y + 0.3);
    let inside = Point::new(edge.x, edge.y + 0.3);
    let phi = basis.eval_eigenfunctions(&[face, inside]).unwrap();
    for j in 0..basis.len() {
        assert!((phi[(0, j)] - phi[(1, j)]).abs() < 1e-14);
    }
}

#[test]
fn interval_basis_matches_cosines() {
    let grid = IntervalGrid::tiled(1.0, 1.0 / 400.0).unwrap();
    let basis = solve_eigenbasis(&assemble_interval_stencil(&grid, BoundarySpec::NeumannZero), 5).unwrap();
    for (k, mu) in basis.eigenvalues().iter().enumerate() {
        let exact = (k as f64 * PI).powi(2);
        assert!((mu - exact).abs() <= 1e-3 * exact.max(1.0));
    }
    // unit L2 norm on [0, 1]: φ_1 ≈ √2 cos(πx) up to sign
    let phi = basis.eval_eigenfunctions(&[Point::new(0.0, 0.0), Point::new(0.25, 0.0)]).unwrap();
    assert!((phi[(0, 1)].abs() - 2f64.sqrt()).abs() < 1e-3);
    assert!((phi[(1, 1)].abs() - 1.0).abs() < 1e-3);
    assert!(basis.eval_eigenfunctions(&[Point::new(1.01, 0.0)]).is_err());
}
