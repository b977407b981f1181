//! Property tests over randomised geometries, kernels, optimiser runs and metrics.

use bcgp_core::metrics::{msll, nmse};
use bcgp_core::*;
use proptest::prelude::*;

fn hole() -> impl Strategy<Value = Hole> {
    prop_oneof![
        (20.0..80.0f64, 20.0..80.0f64, 3.0..15.0f64).prop_map(|(cx, cy, r)| Hole::Circle { cx, cy, r }),
        (15.0..70.0f64, 15.0..70.0f64, 4.0..15.0f64, 4.0..15.0f64)
            .prop_map(|(x0, y0, w, h)| Hole::Rect { x0, y0, x1: x0 + w, y1: y0 + h }),
    ]
}

fn geometry() -> impl Strategy<Value = DomainGeometry> {
    (prop::collection::vec(hole(), 0..4), 100.0..130.0f64, 100.0..130.0f64).prop_filter_map(
        "holes overlap",
        |(holes, w, h)| DomainGeometry::new(w, h, holes).ok(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adding_a_hole_never_adds_cells(g in geometry(), extra in hole()) {
        let Ok(with) = g.with_hole(extra) else { return Ok(()) };
        let (Ok(before), Ok(after)) = (rasterize(&g, 2.0), rasterize(&with, 2.0)) else { return Ok(()) };
        prop_assert!(after.len() <= before.len());
        for cell in after.cells() {
            prop_assert!(before.index_of(*cell).is_some());
        }
    }

    #[test]
    fn halving_the_step_quadruples_a_plain_rectangle(nx in 2usize..30, ny in 2usize..30, h in 0.5..4.0f64) {
        let g = DomainGeometry::new(nx as f64 * h, ny as f64 * h, vec![]).unwrap();
        let coarse = rasterize(&g, h).unwrap();
        let fine = rasterize(&g, h / 2.0).unwrap();
        prop_assert_eq!(coarse.len(), (nx + 1) * (ny + 1));
        prop_assert_eq!(fine.len(), (2 * nx + 1) * (2 * ny + 1));
        prop_assert!(fine.len() >= 4 * coarse.len() - 2 * (nx + ny) - 3);
    }

    #[test]
    fn boundary_cells_are_the_cells_with_a_missing_neighbour(g in geometry()) {
        let Ok(mask) = rasterize(&g, 2.0) else { return Ok(()) };
        let b = boundary_cells(&mask);
        for (k, cell) in mask.cells().iter().enumerate() {
            prop_assert_eq!(b.contains(k), mask.neighbours4(*cell).count() < 4);
        }
        prop_assert!(b.outer.iter().all(|k| b.inner.binary_search(k).is_err()));
    }

    #[test]
    fn stencils_are_symmetric_and_neumann_rows_sum_to_zero(g in geometry(), h in prop::sample::select(vec![2.0, 2.5, 4.0])) {
        let Ok(mask) = rasterize(&g, h) else { return Ok(()) };
        let neumann = assemble_stencil(&mask, BoundarySpec::NeumannZero);
        prop_assert!(neumann.is_symmetric());
        prop_assert!(neumann.row_sums().iter().all(|s| *s == 0.0));
        let dirichlet = assemble_stencil(&mask, BoundarySpec::DirichletZero);
        prop_assert!(dirichlet.is_symmetric());
        prop_assert!(dirichlet.row_sums().iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn covariance_matrices_are_positive_semidefinite(
        pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..40),
        sigma_f2 in 0.01..10.0f64,
        l in 0.5..80.0f64,
        se in any::<bool>(),
    ) {
        let family = if se { KernelFamily::SquaredExponential } else { KernelFamily::Matern32 };
        let spec = KernelSpec::new(family, sigma_f2, l).unwrap();
        let x: Vec<Point> = pts.iter().map(|&(a, b)| Point::new(a, b)).collect();
        let k = spec.covariance(&x, &x);
        let trace = k.trace();
        let min = k.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8 * trace, "min eigenvalue {} trace {}", min, trace);
    }

    #[test]
    fn spectral_density_is_positive_and_decreasing(sigma_f2 in 0.01..10.0f64, l in 0.1..100.0f64, w in 0.0..10.0f64, dim in 1usize..=2) {
        let spec = KernelSpec::matern32(sigma_f2, l).unwrap();
        let (a, b) = (spec.spectral_density(w / l, dim), spec.spectral_density((w + 0.5) / l, dim));
        prop_assert!(a > 0.0 && b > 0.0 && a > b);
    }

    #[test]
    fn qpso_respects_bounds_and_is_deterministic(
        seed in any::<u64>(),
        lo in -10.0..0.0f64,
        width in 0.1..20.0f64,
        target in -15.0..15.0f64,
    ) {
        let cfg = QpsoConfig { swarm: 8, iterations: 30, seed, ..QpsoConfig::default() }
            .with_bounds(vec![(lo, lo + width), (-1.0, 1.0)]);
        let f = |x: &[f64]| (x[0] - target).powi(2) + x[1].abs();
        let a = qpso_minimize(f, &cfg).unwrap();
        let b = qpso_minimize(f, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.best_point[0] >= lo && a.best_point[0] <= lo + width);
        prop_assert!(a.best_point[1] >= -1.0 && a.best_point[1] <= 1.0);
        prop_assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(a.trace.len(), cfg.iterations);
    }

    #[test]
    fn nmse_is_shift_and_scale_invariant(
        truth in prop::collection::vec(-5.0..5.0f64, 3..30),
        noise in prop::collection::vec(-1.0..1.0f64, 30),
        shift in -100.0..100.0f64,
        scale in prop::sample::select(vec![-3.0, -0.01, 0.5, 7.0, 1e-6]),
    ) {
        prop_assume!(bcgp_core::metrics::population_variance(&truth) > 1e-6);
        let pred: Vec<f64> = truth.iter().zip(&noise).map(|(t, e)| t + e).collect();
        let base = nmse(&pred, &truth).unwrap();
        prop_assert!(base >= 0.0);
        let shifted = nmse(
            &pred.iter().map(|v| v + shift).collect::<Vec<_>>(),
            &truth.iter().map(|v| v + shift).collect::<Vec<_>>(),
        ).unwrap();
        let scaled = nmse(
            &pred.iter().map(|v| v * scale).collect::<Vec<_>>(),
            &truth.iter().map(|v| v * scale).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!((shifted - base).abs() <= 1e-6 * base.max(1.0));
        prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn msll_improves_as_the_mean_approaches_the_truth(
        truth in prop::collection::vec(-5.0..5.0f64, 1..20),
        offset in 0.1..4.0f64,
        var in 0.05..3.0f64,
        t in 0.05..0.95f64,
    ) {
        let far: Vec<f64> = truth.iter().map(|v| v + offset).collect();
        let near: Vec<f64> = truth.iter().map(|v| v + t * offset).collect();
        let vars = vec![var; truth.len()];
        let a = msll(&far, &vars, &truth, 0.3, 2.0).unwrap();
        let b = msll(&near, &vars, &truth, 0.3, 2.0).unwrap();
        prop_assert!(b < a);
    }
}

