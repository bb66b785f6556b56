//! The `μ` and `γ` blocks: closed-form weighted location and the
//! quantile-thresholded majorize-minimize iteration for the outlyingness
//! vector.

use nalgebra::DVector;

use crate::error::{Result, RlgpError};
use crate::estimator::objective::{apply_sinv, loss, residual};
use crate::kernel::CovarianceState;

/// Safety factor applied on top of `1/λ_min(S)` for the MM step size.
pub const RHO_SAFETY: f64 = 1.0 + 1e-6;

/// Sparse mean-shift vector; `support` lists the indices with `γ_i ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlyingnessVector {
    pub gamma: DVector<f64>,
    pub support: Vec<usize>,
}

impl OutlyingnessVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            gamma: DVector::zeros(n),
            support: Vec::new(),
        }
    }

    pub fn from_vector(gamma: DVector<f64>) -> Self {
        let support = gamma
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { gamma, support }
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

/// Keeps the `q` largest-magnitude entries of `s` and zeroes the rest.
/// Equal magnitudes are ranked by ascending index.
pub fn quantile_threshold(s: &DVector<f64>, q: usize) -> DVector<f64> {
    let p = s.len();
    if q >= p {
        return s.clone();
    }
    let mut out = DVector::zeros(p);
    if q == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| s[b].abs().total_cmp(&s[a].abs()).then(a.cmp(&b)));
    for &i in &order[..q] {
        out[i] = s[i];
    }
    out
}

/// Closed-form minimizer of the loss over `μ`: `1ᵀS⁻¹(y − γ) / 1ᵀS⁻¹1`.
pub fn update_mu(cov: &CovarianceState, y: &DVector<f64>, gamma: &DVector<f64>) -> Result<f64> {
    let n = cov.n();
    if y.len() != n || gamma.len() != n {
        return Err(RlgpError::DimensionMismatch {
            expected: n,
            found: y.len().max(gamma.len()),
        });
    }
    let weights = apply_sinv(cov, &DVector::from_element(n, 1.0));
    let denom = weights.sum();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(RlgpError::Numerical(format!(
            "weighted-mean denominator 1ᵀS⁻¹1 = {denom:e} is not positive"
        )));
    }
    Ok(weights.dot(&(y - gamma)) / denom)
}

/// Controls for the inner `γ` iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    pub max_iter: usize,
    /// Stop when `‖γ_{j+1} − γ_j‖∞ ≤ tol · (1 + ‖y − 1μ‖∞)`.
    pub tol: f64,
    /// Step parameter; defaults to `(1 + 1e-6) / λ_min(S)`.
    pub rho: Option<f64>,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            rho: None,
        }
    }
}

/// Result of the inner `γ` loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaUpdate {
    pub gamma: OutlyingnessVector,
    pub iterations: usize,
    pub converged: bool,
    pub rho: f64,
    /// Loss after each inner iteration, starting with the initial value.
    pub losses: Vec<f64>,
    /// Largest support observed across the inner iterations.
    pub max_support: usize,
}

/// Iterates `γ ← Θ#(γ − (1/ρ) S⁻¹(γ − (y − 1μ)); q)` with `S` held fixed.
///
/// Every iterate has at most `q` non-zeros, and the loss (for any `c0`) is
/// non-increasing because each step minimizes a majorizer that touches the
/// loss at the previous iterate.
pub fn update_gamma(
    gamma_init: &DVector<f64>,
    cov: &CovarianceState,
    mu: f64,
    y: &DVector<f64>,
    q: usize,
    opts: GammaOptions,
) -> Result<GammaUpdate> {
    let n = cov.n();
    if y.len() != n || gamma_init.len() != n {
        return Err(RlgpError::DimensionMismatch {
            expected: n,
            found: y.len().max(gamma_init.len()),
        });
    }
    let rho = opts.rho.unwrap_or(RHO_SAFETY / cov.lambda_min_s());
    if q == 0 {
        let gamma = DVector::zeros(n);
        let l = loss(mu, &gamma, cov, y, 0.0)?;
        return Ok(GammaUpdate {
            gamma: OutlyingnessVector::zeros(n),
            iterations: 0,
            converged: true,
            rho,
            losses: vec![l],
            max_support: 0,
        });
    }

    // the start must be feasible for the descent argument
    let mut gamma = quantile_threshold(gamma_init, q);
    let centered = y.map(|v| v - mu);
    let scale = 1.0 + centered.amax();
    let mut losses = vec![loss(mu, &gamma, cov, y, 0.0)?];
    let mut max_support = count_nonzero(&gamma);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let grad = -apply_sinv(cov, &residual(mu, &gamma, y));
        let xi = &gamma - grad / rho;
        let next = quantile_threshold(&xi, q);
        let change = (&next - &gamma).amax();
        gamma = next;
        iterations += 1;
        max_support = max_support.max(count_nonzero(&gamma));
        losses.push(loss(mu, &gamma, cov, y, 0.0)?);
        if change <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    Ok(GammaUpdate {
        gamma: OutlyingnessVector::from_vector(gamma),
        iterations,
        converged,
        rho,
        losses,
        max_support,
    })
}

fn count_nonzero(v: &DVector<f64>) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(quantile_threshold(&v(&[3.0, -5.0, 1.0]), 1), v(&[0.0, -5.0, 0.0]));
        assert_eq!(quantile_threshold(&v(&[3.0, -5.0, 1.0]), 0), v(&[0.0, 0.0, 0.0]));
        assert_eq!(quantile_threshold(&v(&[3.0, -5.0, 1.0]), 3), v(&[3.0, -5.0, 1.0]));
        assert_eq!(quantile_threshold(&v(&[2.0, -2.0, 1.0]), 1), v(&[2.0, 0.0, 0.0]));
    }

    #[test]
    fn mu_examples() {
        let eye = CovarianceState::scaled_identity(3, 1.0).unwrap();
        let mean = update_mu(&eye, &v(&[1.0, 2.0, 6.0]), &v(&[0.0, 0.0, 0.0])).unwrap();
        assert!((mean - 3.0).abs() < 1e-15);
        let mu = update_mu(&eye, &v(&[1.0, 2.0, 3.0]), &v(&[0.0, 0.0, 3.0])).unwrap();
        assert!((mu - 1.0).abs() < 1e-15);

        // S⁻¹ = diag(2, 1) ⇔ Σ = diag(1/4, 1)
        let cov = CovarianceState::from_sigma(DMatrix::from_diagonal(&v(&[0.25, 1.0]))).unwrap();
        let mu = update_mu(&cov, &v(&[0.0, 3.0]), &v(&[0.0, 0.0])).unwrap();
        assert!((mu - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_with_empty_support() {
        let cov = CovarianceState::scaled_identity(2, 1.0).unwrap();
        let up = update_gamma(&v(&[1.0, 1.0]), &cov, 0.0, &v(&[3.0, 7.0]), 0, GammaOptions::default()).unwrap();
        assert_eq!(up.gamma.gamma, v(&[0.0, 0.0]));
        assert_eq!(up.iterations, 0);
    }

    #[test]
    fn gamma_absorbs_all_residuals_when_unconstrained() {
        let cov = CovarianceState::scaled_identity(2, 1.0).unwrap();
        let up = update_gamma(&v(&[0.0, 0.0]), &cov, 0.0, &v(&[3.0, 7.0]), 2, GammaOptions::default()).unwrap();
        assert!((up.gamma.gamma - v(&[3.0, 7.0])).amax() < 1e-9);
    }

    #[test]
    fn gamma_fixed_point_with_unit_step() {
        let cov = CovarianceState::scaled_identity(2, 1.0).unwrap();
        let opts = GammaOptions {
            rho: Some(1.0),
            ..GammaOptions::default()
        };
        let up = update_gamma(&v(&[0.0, 0.0]), &cov, 0.0, &v(&[3.0, 7.0]), 1, opts).unwrap();
        assert_eq!(up.gamma.gamma, v(&[0.0, 7.0]));
        assert_eq!(up.gamma.support, vec![1]);
        // first step lands on the fixed point, second confirms it
        assert_eq!(up.iterations, 2);
        assert!(up.converged);
    }

    #[test]
    fn infeasible_start_is_projected() {
        let cov = CovarianceState::scaled_identity(3, 2.0).unwrap();
        let up = update_gamma(&v(&[1.0, 2.0, 3.0]), &cov, 0.0, &v(&[0.0, 5.0, 0.0]), 1, GammaOptions::default())
            .unwrap();
        assert!(up.max_support <= 1);
        assert_eq!(up.gamma.support, vec![1]);
    }
}
