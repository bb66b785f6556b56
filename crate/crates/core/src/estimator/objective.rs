//! The perspective-transformed robust loss
//!
//! ```text
//! l(μ, γ, S) = ½ (y − 1μ − γ)ᵀ S⁻¹ (y − 1μ − γ) + (c0/2) Tr(S),   S = Σ^{1/2}
//! ```
//!
//! and its gradients. Everything is evaluated in the eigenbasis of `Σ`, so a
//! loss evaluation costs two `O(n²)` products once the decomposition exists.
//!
//! The hyperparameter gradients use the exact Fréchet derivative of the
//! matrix square root. For a symmetric perturbation `dΣ`, the induced `dS`
//! solves `S dS + dS S = dΣ`; in the eigenbasis this is
//! `dS'_ij = dΣ'_ij / (s_i + s_j)` with `s` the eigenvalues of `S`. Only for
//! perturbations that commute with `Σ` (the `ν` direction) does this reduce
//! to `dS = ½ S^{-1/2} dΣ S^{-1/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RlgpError};
use crate::kernel::{CovarianceState, DistanceMatrix};

/// Gradient of the loss with respect to every parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub mu: f64,
    pub gamma: DVector<f64>,
    pub nu: f64,
    pub theta0: f64,
    pub vartheta: f64,
}

fn check_dims(gamma: &DVector<f64>, cov: &CovarianceState, y: &DVector<f64>) -> Result<()> {
    let n = cov.n();
    for len in [gamma.len(), y.len()] {
        if len != n {
            return Err(RlgpError::DimensionMismatch { expected: n, found: len });
        }
    }
    Ok(())
}

/// `y − 1μ − γ`.
pub fn residual(mu: f64, gamma: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    y.zip_map(gamma, |yi, gi| yi - mu - gi)
}

/// Quadratic part `½ rᵀ S⁻¹ r` from a residual.
pub(crate) fn quadratic_term(cov: &CovarianceState, r: &DVector<f64>) -> f64 {
    let u = cov.eigvecs().tr_mul(r);
    let lam = cov.eigvals();
    0.5 * u.iter().zip(lam.iter()).map(|(ui, li)| ui * ui / li.sqrt()).sum::<f64>()
}

/// The robust loss `l(μ, γ, S)`.
pub fn loss(
    mu: f64,
    gamma: &DVector<f64>,
    cov: &CovarianceState,
    y: &DVector<f64>,
    c0: f64,
) -> Result<f64> {
    check_dims(gamma, cov, y)?;
    let r = residual(mu, gamma, y);
    Ok(quadratic_term(cov, &r) + 0.5 * c0 * cov.trace_s())
}

/// `S⁻¹ v` through the eigenbasis.
pub(crate) fn apply_sinv(cov: &CovarianceState, v: &DVector<f64>) -> DVector<f64> {
    cov.apply_sigma_power(-0.5, v)
}

/// Gradient of the loss with respect to `γ` alone: `S⁻¹(γ − (y − 1μ))`.
pub fn grad_gamma(
    mu: f64,
    gamma: &DVector<f64>,
    cov: &CovarianceState,
    y: &DVector<f64>,
) -> DVector<f64> {
    -apply_sinv(cov, &residual(mu, gamma, y))
}

/// All five gradients of the loss.
///
/// `cov` must have been built from kernel parameters over `d` (it carries
/// `θ0` and `E = exp(-ϑD)`).
pub fn grad_loss(
    mu: f64,
    gamma: &DVector<f64>,
    cov: &CovarianceState,
    y: &DVector<f64>,
    c0: f64,
    d: &DistanceMatrix,
) -> Result<LossGradient> {
    check_dims(gamma, cov, y)?;
    if d.n() != cov.n() {
        return Err(RlgpError::DimensionMismatch { expected: cov.n(), found: d.n() });
    }
    let (params, e) = match (cov.params(), cov.correlation()) {
        (Some(p), Some(e)) => (p, e),
        _ => {
            return Err(RlgpError::InvalidArgument(
                "hyperparameter gradients need a covariance built from kernel parameters".into(),
            ))
        }
    };
    let n = cov.n();
    let v = cov.eigvecs();
    let s = cov.root_eigvals();
    let r = residual(mu, gamma, y);

    // w = eigen-coordinates of S⁻¹ r
    let mut w = v.tr_mul(&r);
    for i in 0..n {
        w[i] /= s[i];
    }
    let sinv_r = v * &w;
    let g_mu = -sinv_r.sum();
    let g_gamma = -sinv_r;

    // ∂l/∂Σ in the eigenbasis: K ∘ (−½ w wᵀ + (c0/2) I), K_ij = 1/(s_i + s_j)
    let mut h_eig = DMatrix::zeros(n, n);
    let mut g_nu = 0.0;
    for j in 0..n {
        for i in 0..n {
            let mut hij = -0.5 * w[i] * w[j] / (s[i] + s[j]);
            if i == j {
                hij += 0.25 * c0 / s[i];
                g_nu += hij;
            }
            h_eig[(i, j)] = hij;
        }
    }
    let h = v * h_eig * v.transpose();

    let dm = d.as_matrix();
    let mut g_theta0 = 0.0;
    let mut g_vartheta = 0.0;
    for j in 0..n {
        for i in 0..n {
            let hij = h[(i, j)];
            let eij = e[(i, j)];
            g_theta0 += hij * eij;
            g_vartheta -= hij * params.theta0 * dm[(i, j)] * eij;
        }
    }

    Ok(LossGradient {
        mu: g_mu,
        gamma: g_gamma,
        nu: g_nu,
        theta0: g_theta0,
        vartheta: g_vartheta,
    })
}

/// Majorizing surrogate of the loss in `γ` around `gamma_prev`:
/// `l(γ⁻) + ⟨∇l(γ⁻), γ − γ⁻⟩ + (ρ/2)‖γ − γ⁻‖²`.
pub fn surrogate(
    gamma: &DVector<f64>,
    gamma_prev: &DVector<f64>,
    mu: f64,
    cov: &CovarianceState,
    y: &DVector<f64>,
    c0: f64,
    rho: f64,
) -> Result<f64> {
    check_dims(gamma, cov, y)?;
    let base = loss(mu, gamma_prev, cov, y, c0)?;
    let grad = grad_gamma(mu, gamma_prev, cov, y);
    let diff = gamma - gamma_prev;
    Ok(base + grad.dot(&diff) + 0.5 * rho * diff.norm_squared())
}
