//! Plug-in posterior prediction at the query point and scoring rules.

use nalgebra::DVector;
use statrs::function::erf::erfc;

use crate::error::{Result, RlgpError};
use crate::estimator::FittedLocalModel;

/// Gaussian predictive distribution at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub query: Vec<f64>,
    /// True when the raw variance came out negative and was clamped to 0.
    pub variance_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PredictOptions {
    /// Add the fitted nugget `ν̂` to the variance (observed-response scale).
    pub include_nugget: bool,
}

/// Posterior mean `μ + c*ᵀ Σ⁻¹ (y − 1μ − γ)` and variance
/// `θ0 − c*ᵀ Σ⁻¹ c*`, with the fitted estimates plugged in.
pub fn predict(model: &FittedLocalModel) -> Result<Prediction> {
    predict_with(model, PredictOptions::default())
}

pub fn predict_with(model: &FittedLocalModel, opts: PredictOptions) -> Result<Prediction> {
    let nb = &model.neighborhood;
    let p = model.params;
    let cross = DVector::from_iterator(nb.n(), nb.cross_sq_dist.iter().map(|&d| p.covariance_at(d)));
    let r = DVector::from_iterator(
        nb.n(),
        nb.y.iter().zip(model.gamma.gamma.iter()).map(|(y, g)| y - model.mu - g),
    );
    // Σ⁻¹ through the cached eigendecomposition
    let weights = model.cov.solve_sigma(&cross);
    let mean = model.mu + weights.dot(&r);
    let raw = p.theta0 - weights.dot(&cross);
    if !(mean.is_finite() && raw.is_finite()) {
        return Err(RlgpError::Numerical(format!(
            "non-finite prediction (mean {mean}, variance {raw})"
        )));
    }
    let variance_clamped = raw < 0.0;
    let mut variance = raw.max(0.0);
    if opts.include_nugget {
        variance += p.nu;
    }
    Ok(Prediction {
        mean,
        variance,
        query: nb.query.clone(),
        variance_clamped,
    })
}

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal CDF.
fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Closed-form CRPS of `N(mean, variance)` against an observation:
/// `σ [z(2Φ(z) − 1) + 2φ(z) − 1/√π]`, `z = (y − mean)/σ`.
/// A zero variance degenerates to the absolute error.
pub fn crps_gaussian(mean: f64, variance: f64, y_true: f64) -> f64 {
    let sd = variance.max(0.0).sqrt();
    let err = y_true - mean;
    if sd == 0.0 {
        return err.abs();
    }
    let z = err / sd;
    let value = sd * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - FRAC_1_SQRT_PI);
    value.max(0.0)
}

/// Mean squared error.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(RlgpError::DimensionMismatch {
            expected: predictions.len(),
            found: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(RlgpError::InvalidInput("mse of empty vectors".into()));
    }
    let total: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / predictions.len() as f64)
}
