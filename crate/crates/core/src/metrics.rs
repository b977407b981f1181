//! Normalised mean square error and mean standardised log loss.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Arithmetic mean, summed in order.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (`1/N`) variance.
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("length mismatch: {a} predictions for {b} targets")));
    }
    Ok(())
}

/// `100 · Σ(ŷ − y)² / (N σ_y²)` with the population variance of the truth.
pub fn nmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("nMSE needs at least two points".into()));
    }
    let m = mean(truth);
    // N σ_y² written as the raw sum so that predicting the mean gives exactly 100
    let spread: f64 = truth.iter().map(|y| (y - m) * (y - m)).sum();
    if !(spread > 0.0) {
        return Err(Error::DegenerateTruth);
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(100.0 * sse / spread)
}

fn gaussian_nll(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    0.5 * LN_2PI + 0.5 * var.ln() + r * r / (2.0 * var)
}

/// Mean over points of `−log p(y | model) + log p(y | trivial)`, where the
/// trivial model is a Gaussian with the training targets' mean and variance.
pub fn msll(pred_mean: &[f64], pred_var: &[f64], truth: &[f64], train_mean: f64, train_var: f64) -> Result<f64> {
    check_lengths(pred_mean.len(), truth.len())?;
    check_lengths(pred_var.len(), truth.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("MSLL needs at least one point".into()));
    }
    if !(train_var > 0.0) {
        return Err(Error::ZeroVariance { index: truth.len() });
    }
    let mut total = 0.0;
    for (k, ((&y, &m), &v)) in truth.iter().zip(pred_mean).zip(pred_var).enumerate() {
        if !(v > 0.0) {
            return Err(Error::ZeroVariance { index: k });
        }
        total += gaussian_nll(y, m, v) - gaussian_nll(y, train_mean, train_var);
    }
    Ok(total / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Percent.
    pub nmse: f64,
    /// Nats.
    pub msll: f64,
    pub n_test: usize,
    pub sq_errors: Vec<f64>,
}

impl MetricReport {
    /// `pred_var` should already include the observation noise.
    pub fn evaluate(pred_mean: &[f64], pred_var: &[f64], truth: &[f64], train_targets: &[f64]) -> Result<Self> {
        if train_targets.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let nmse = nmse(pred_mean, truth)?;
        let msll = msll(pred_mean, pred_var, truth, mean(train_targets), population_variance(train_targets))?;
        let sq_errors = pred_mean.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).collect();
        Ok(Self { nmse, msll, n_test: truth.len(), sq_errors })
    }
}
