//! Quantum-behaved particle swarm optimisation over a box.
//!
//! Mean-best formulation: each particle is drawn around a random attractor
//! between its personal best and the global best, with a spread proportional
//! to its distance from the swarm's mean personal best. The spread coefficient
//! decays linearly over the run.
//!
//! All random draws for an iteration happen before the objective is called, so
//! a batch objective may evaluate the swarm in any order or in parallel
//! without changing the result.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpsoConfig {
    pub swarm: usize,
    pub iterations: usize,
    pub ce_start: f64,
    pub ce_end: f64,
    /// `(lower, upper)` per dimension.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for QpsoConfig {
    fn default() -> Self {
        Self {
            swarm: 40,
            iterations: 200,
            ce_start: 1.0,
            ce_end: 0.5,
            bounds: Vec::new(),
            seed: 0,
        }
    }
}

impl QpsoConfig {
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm < 2 {
            return Err(Error::InvalidArgument("swarm size must be at least 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidArgument("no search dimensions".into()));
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!("bounds of dimension {d} are not a finite interval")));
            }
        }
        if !(self.ce_start.is_finite() && self.ce_end.is_finite() && self.ce_start > 0.0 && self.ce_end > 0.0) {
            return Err(Error::InvalidArgument("contraction-expansion coefficients must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpsoResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Best value after each iteration; non-increasing.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Minimises `objective` one point at a time.
pub fn qpso_minimize<F>(mut objective: F, config: &QpsoConfig) -> Result<QpsoResult>
where
    F: FnMut(&[f64]) -> f64,
{
    qpso_minimize_batch(|swarm: &[Vec<f64>]| swarm.iter().map(|x| objective(x)).collect(), config)
}

/// Minimises an objective that scores a whole swarm per call. The returned
/// vector must hold one value per input point, in order.
pub fn qpso_minimize_batch<F>(mut objective: F, config: &QpsoConfig) -> Result<QpsoResult>
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    config.validate()?;
    let dim = config.bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluate = |points: &[Vec<f64>]| -> Result<Vec<f64>> {
        let values = objective(points);
        if values.len() != points.len() {
            return Err(Error::OptimizerFailure("batch objective returned the wrong number of values".into()));
        }
        Ok(values.into_iter().map(|v| if v.is_finite() { v } else { f64::INFINITY }).collect())
    };

    let mut positions: Vec<Vec<f64>> = (0..config.swarm)
        .map(|_| config.bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
        .collect();
    let mut pbest = positions.clone();
    let mut pbest_val = evaluate(&positions)?;
    let mut evaluations = positions.len();
    let mut g = argmin(&pbest_val);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut mbest = vec![0.0; dim];

    for t in 0..config.iterations {
        let frac = if config.iterations > 1 { t as f64 / (config.iterations - 1) as f64 } else { 0.0 };
        let beta = config.ce_start + (config.ce_end - config.ce_start) * frac;
        for (d, m) in mbest.iter_mut().enumerate() {
            *m = pbest.iter().map(|p| p[d]).sum::<f64>() / config.swarm as f64;
        }
        for (i, x) in positions.iter_mut().enumerate() {
            for d in 0..dim {
                let phi: f64 = rng.random();
                let u: f64 = 1.0 - rng.random::<f64>();
                let attractor = phi * pbest[i][d] + (1.0 - phi) * pbest[g][d];
                let step = beta * (mbest[d] - x[d]).abs() * (1.0 / u).ln();
                let raw = if rng.random::<bool>() { attractor + step } else { attractor - step };
                let (lo, hi) = config.bounds[d];
                x[d] = reflect(raw, lo, hi);
            }
        }
        let values = evaluate(&positions)?;
        evaluations += values.len();
        for (i, v) in values.into_iter().enumerate() {
            if v < pbest_val[i] {
                pbest_val[i] = v;
                pbest[i].clone_from(&positions[i]);
            }
        }
        g = argmin(&pbest_val);
        trace.push(pbest_val[g]);
    }

    if !pbest_val[g].is_finite() {
        return Err(Error::OptimizerFailure(format!("all {evaluations} objective evaluations were non-finite")));
    }
    Ok(QpsoResult { best_point: pbest[g].clone(), best_value: pbest_val[g], trace, evaluations })
}

/// Index of the smallest value; the first one on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Mirrors `x` back into `[lo, hi]`, then clamps whatever overshoots twice.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    if !x.is_finite() {
        return 0.5 * (lo + hi);
    }
    let y = if x < lo {
        lo + (lo - x)
    } else if x > hi {
        hi - (x - hi)
    } else {
        x
    };
    y.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(bounds: Vec<(f64, f64)>) -> QpsoConfig {
        QpsoConfig { seed: 7, ..QpsoConfig::default() }.with_bounds(bounds)
    }

    #[test]
    fn solves_shifted_parabola() {
        let r = qpso_minimize(|x| (x[0] - 2.0).powi(2), &config(vec![(0.0, 5.0)])).unwrap();
        assert!((r.best_point[0] - 2.0).abs() < 1e-2);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.trace.len(), 200);
    }

    #[test]
    fn solves_sphere() {
        let r = qpso_minimize(|x| x[0] * x[0] + x[1] * x[1], &config(vec![(-5.0, 5.0), (-5.0, 5.0)])).unwrap();
        assert!(r.best_value < 1e-3);
    }

    #[test]
    fn flat_objective() {
        let r = qpso_minimize(|_| 3.0, &config(vec![(-1.0, 1.0)])).unwrap();
        assert_eq!(r.best_value, 3.0);
        assert!((-1.0..=1.0).contains(&r.best_point[0]));
    }

    #[test]
    fn deterministic_under_seed() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 1.0).abs();
        let c = config(vec![(-2.0, 2.0), (-3.0, 1.0)]);
        let a = qpso_minimize(f, &c).unwrap();
        let b = qpso_minimize(f, &c).unwrap();
        assert_eq!(a, b);
        let reversed = qpso_minimize_batch(
            |pts: &[Vec<f64>]| {
                let mut out: Vec<f64> = pts.iter().rev().map(|p| f(p)).collect();
                out.reverse();
                out
            },
            &c,
        )
        .unwrap();
        assert_eq!(a, reversed);
    }

    #[test]
    fn non_finite_regions_are_avoided() {
        let r = qpso_minimize(|x| if x[0] < 1.0 { f64::NAN } else { x[0] }, &config(vec![(0.0, 4.0)])).unwrap();
        assert!(r.best_value >= 1.0 && r.best_value < 1.05);
    }

    #[test]
    fn all_non_finite_fails() {
        let r = qpso_minimize(|_| f64::INFINITY, &QpsoConfig { iterations: 3, ..config(vec![(0.0, 1.0)]) });
        assert!(matches!(r, Err(Error::OptimizerFailure(_))));
    }

    #[test]
    fn invalid_configs() {
        assert!(qpso_minimize(|_| 0.0, &QpsoConfig::default()).is_err());
        assert!(qpso_minimize(|_| 0.0, &config(vec![(1.0, 1.0)])).is_err());
        assert!(qpso_minimize(|_| 0.0, &QpsoConfig { swarm: 1, ..config(vec![(0.0, 1.0)]) }).is_err());
    }

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect(-0.5, 0.0, 1.0), 0.5);
        assert_eq!(reflect(1.25, 0.0, 1.0), 0.75);
        assert_eq!(reflect(7.0, 0.0, 1.0), 0.0);
        assert_eq!(reflect(f64::NAN, 0.0, 1.0), 0.5);
    }
}
