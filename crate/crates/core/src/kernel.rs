//! Squared distances, the squared-exponential covariance and the symmetric
//! matrix powers of the local covariance.
//!
//! Every power of `Σ` that the estimator needs (`S = Σ^{1/2}`, `S⁻¹`, `S⁻³`,
//! `S^{-3/2}`) is formed from one symmetric eigendecomposition
//! `Σ = V diag(λ) Vᵀ` as `V diag(λ^p) Vᵀ`. Eigenvalues are clamped from below
//! at `1e-12 · max(λ)` so that the negative powers stay finite when `Σ` is
//! nearly singular.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, RlgpError};

/// Relative eigenvalue floor applied to every covariance decomposition.
pub const EIGEN_FLOOR_REL: f64 = 1e-12;

/// Absolute noise-variance floor used when the responses have zero spread.
pub const NU_FLOOR_ABS: f64 = 1e-12;

/// Relative noise-variance floor, as a multiple of the response variance.
pub const NU_FLOOR_REL: f64 = 1e-8;

/// Lower bound for the noise variance given the local responses:
/// `1e-8 · var(y)`, or `1e-12` when `var(y) = 0`.
pub fn nu_floor(y: &[f64]) -> f64 {
    let v = crate::stats::variance(y);
    if v.is_finite() && v > 0.0 {
        (NU_FLOOR_REL * v).max(f64::MIN_POSITIVE)
    } else {
        NU_FLOOR_ABS
    }
}

/// Symmetric matrix of squared Euclidean distances between local inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Wraps an existing matrix after checking symmetry, a zero diagonal and
    /// non-negative finite entries.
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(RlgpError::InvalidInput(format!(
                "distance matrix must be square, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        let n = d.nrows();
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(RlgpError::InvalidInput(format!(
                    "distance matrix has non-zero diagonal at {i}"
                )));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 || v != d[(j, i)] {
                    return Err(RlgpError::InvalidInput(format!(
                        "distance matrix entry ({i}, {j}) = {v} is invalid"
                    )));
                }
            }
        }
        Ok(Self { d })
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// Squared Euclidean distances between the rows of `x` (an `n × d` matrix).
pub fn pairwise_sq_dist(x: &DMatrix<f64>) -> Result<DistanceMatrix> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(RlgpError::InvalidInput(
            "need at least one point with one coordinate".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RlgpError::InvalidInput("non-finite input coordinate".into()));
    }
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for k in 0..x.ncols() {
                let diff = x[(i, k)] - x[(j, k)];
                acc += diff * diff;
            }
            d[(i, j)] = acc;
            d[(j, i)] = acc;
        }
    }
    Ok(DistanceMatrix { d })
}

/// Squared Euclidean distance between two points of equal dimension.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Hyperparameters of `Σ = ν I + θ0 exp(-ϑ D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Noise variance (nugget).
    pub nu: f64,
    /// Signal variance.
    pub theta0: f64,
    /// Concentration; larger values decorrelate faster with distance.
    pub vartheta: f64,
}

impl KernelParams {
    pub fn new(nu: f64, theta0: f64, vartheta: f64) -> Self {
        Self { nu, theta0, vartheta }
    }

    /// Checks the parameter invariants against a noise floor.
    pub fn validate(&self, nu_floor: f64) -> Result<()> {
        let ok = self.nu.is_finite()
            && self.theta0.is_finite()
            && self.vartheta.is_finite()
            && self.nu >= nu_floor
            && self.nu > 0.0
            && self.theta0 > 0.0
            && self.vartheta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(RlgpError::InvalidArgument(format!(
                "kernel parameters out of range: {self:?} (nu floor {nu_floor:e})"
            )))
        }
    }

    /// Covariance between two points at squared distance `sq_dist`.
    pub fn covariance_at(&self, sq_dist: f64) -> f64 {
        self.theta0 * (-self.vartheta * sq_dist).exp()
    }
}

/// Componentwise `exp(-ϑ D)`.
pub fn correlation_matrix(d: &DistanceMatrix, vartheta: f64) -> DMatrix<f64> {
    d.as_matrix().map(|v| (-vartheta * v).exp())
}

/// `C = θ0 exp(-ϑ D)`, applied componentwise.
pub fn kernel_matrix(d: &DistanceMatrix, theta0: f64, vartheta: f64) -> DMatrix<f64> {
    d.as_matrix().map(|v| theta0 * (-vartheta * v).exp())
}

/// Eigendecomposition of a local covariance and the matrix powers derived
/// from it.
///
/// The dense powers are materialized lazily on first access and cached; the
/// estimator's hot loop works in the eigenbasis and never needs them.
#[derive(Debug)]
pub struct CovarianceState {
    params: Option<KernelParams>,
    correlation: Option<DMatrix<f64>>,
    sigma: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    clamped: usize,
    shalf: OnceLock<DMatrix<f64>>,
    sinv: OnceLock<DMatrix<f64>>,
    sinv3: OnceLock<DMatrix<f64>>,
    sinv3half: OnceLock<DMatrix<f64>>,
}

impl Clone for CovarianceState {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            correlation: self.correlation.clone(),
            sigma: self.sigma.clone(),
            eigvals: self.eigvals.clone(),
            eigvecs: self.eigvecs.clone(),
            clamped: self.clamped,
            shalf: self.shalf.clone(),
            sinv: self.sinv.clone(),
            sinv3: self.sinv3.clone(),
            sinv3half: self.sinv3half.clone(),
        }
    }
}

impl CovarianceState {
    /// Builds `Σ = ν I + θ0 exp(-ϑ D)` and decomposes it.
    pub fn new(params: KernelParams, d: &DistanceMatrix) -> Result<Self> {
        let correlation = correlation_matrix(d, params.vartheta);
        let mut sigma = &correlation * params.theta0;
        for i in 0..sigma.nrows() {
            sigma[(i, i)] += params.nu;
        }
        let mut state = Self::from_sigma(sigma).map_err(|e| match e {
            RlgpError::Numerical(msg) => RlgpError::Numerical(format!("{msg}; params {params:?}")),
            other => other,
        })?;
        state.params = Some(params);
        state.correlation = Some(correlation);
        Ok(state)
    }

    /// Decomposes an arbitrary symmetric positive-definite matrix.
    pub fn from_sigma(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(RlgpError::InvalidInput(format!(
                "covariance must be a non-empty square matrix, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(RlgpError::Numerical("covariance has non-finite entries".into()));
        }
        let n = sigma.nrows();
        let eig = SymmetricEigen::try_new(sigma.clone(), f64::EPSILON, 200 * n.max(10))
            .ok_or_else(|| {
                let diag_max = sigma.diagonal().max();
                let diag_min = sigma.diagonal().min();
                RlgpError::Numerical(format!(
                    "symmetric eigendecomposition did not converge (n={n}, diagonal range [{diag_min:e}, {diag_max:e}])"
                ))
            })?;
        Self::from_eigen(sigma, eig.eigenvalues, eig.eigenvectors)
    }

    /// `S = s·I` (so `Σ = s² I`), without any decomposition.
    pub fn scaled_identity(n: usize, s: f64) -> Result<Self> {
        if n == 0 || !(s.is_finite() && s > 0.0) {
            return Err(RlgpError::InvalidArgument(format!(
                "scaled identity needs n >= 1 and s > 0, got n={n}, s={s}"
            )));
        }
        let sigma = DMatrix::from_diagonal_element(n, n, s * s);
        let eigvals = DVector::from_element(n, s * s);
        Self::from_eigen(sigma, eigvals, DMatrix::identity(n, n))
    }

    fn from_eigen(sigma: DMatrix<f64>, raw: DVector<f64>, eigvecs: DMatrix<f64>) -> Result<Self> {
        let max = raw.max();
        if !(max.is_finite() && max > 0.0) {
            return Err(RlgpError::Numerical(format!(
                "covariance is not positive definite (largest eigenvalue {max:e})"
            )));
        }
        let floor = EIGEN_FLOOR_REL * max;
        let mut clamped = 0;
        let eigvals = raw.map(|v| {
            if v < floor {
                clamped += 1;
                floor
            } else {
                v
            }
        });
        Ok(Self {
            params: None,
            correlation: None,
            sigma,
            eigvals,
            eigvecs,
            clamped,
            shalf: OnceLock::new(),
            sinv: OnceLock::new(),
            sinv3: OnceLock::new(),
            sinv3half: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    /// Parameters `Σ` was built from, when built from kernel parameters.
    pub fn params(&self) -> Option<KernelParams> {
        self.params
    }

    /// `exp(-ϑ D)`, when built from kernel parameters.
    pub fn correlation(&self) -> Option<&DMatrix<f64>> {
        self.correlation.as_ref()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Clamped eigenvalues of `Σ`.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Orthonormal eigenvectors of `Σ` (columns).
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// How many eigenvalues were raised to the floor.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Eigenvalues of `S`, i.e. square roots of the clamped eigenvalues of `Σ`.
    pub fn root_eigvals(&self) -> DVector<f64> {
        self.eigvals.map(f64::sqrt)
    }

    /// Smallest eigenvalue of `S`.
    pub fn lambda_min_s(&self) -> f64 {
        self.eigvals.min().sqrt()
    }

    /// `Tr(S)`.
    pub fn trace_s(&self) -> f64 {
        self.eigvals.iter().map(|v| v.sqrt()).sum()
    }

    /// `V diag(λ^p) Vᵀ` for an arbitrary real power of `Σ`.
    pub fn sigma_power(&self, p: f64) -> DMatrix<f64> {
        let scaled = self.eigvals.map(|v| v.powf(p));
        let mut left = self.eigvecs.clone();
        for (j, mut col) in left.column_iter_mut().enumerate() {
            col *= scaled[j];
        }
        let mut out = left * self.eigvecs.transpose();
        out = (&out + out.transpose()) * 0.5;
        out
    }

    /// `Σ^p v` computed through the eigenbasis in `O(n²)`.
    pub fn apply_sigma_power(&self, p: f64, v: &DVector<f64>) -> DVector<f64> {
        let mut w = self.eigvecs.tr_mul(v);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= self.eigvals[i].powf(p);
        }
        &self.eigvecs * w
    }

    /// `S = Σ^{1/2}`.
    pub fn shalf(&self) -> &DMatrix<f64> {
        self.shalf.get_or_init(|| self.sigma_power(0.5))
    }

    /// `S⁻¹ = Σ^{-1/2}`.
    pub fn sinv(&self) -> &DMatrix<f64> {
        self.sinv.get_or_init(|| self.sigma_power(-0.5))
    }

    /// `S⁻³ = Σ^{-3/2}`.
    pub fn sinv3(&self) -> &DMatrix<f64> {
        self.sinv3.get_or_init(|| self.sigma_power(-1.5))
    }

    /// `S^{-3/2} = Σ^{-3/4}`.
    pub fn sinv3half(&self) -> &DMatrix<f64> {
        self.sinv3half.get_or_init(|| self.sigma_power(-0.75))
    }

    /// Solves `Σ x = b` with the cached decomposition.
    pub fn solve_sigma(&self, b: &DVector<f64>) -> DVector<f64> {
        self.apply_sigma_power(-1.0, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn distances_of_two_points_on_a_line() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let d = pairwise_sq_dist(&x).unwrap();
        assert_eq!(d.as_matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn distances_of_singleton_and_pythagorean_pair() {
        let d = pairwise_sq_dist(&DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(d.as_matrix(), &DMatrix::zeros(1, 1));

        let d = pairwise_sq_dist(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0])).unwrap();
        assert_eq!(d.as_matrix()[(0, 1)], 25.0);
        assert_eq!(d.as_matrix()[(1, 0)], 25.0);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(pairwise_sq_dist(&x), Err(RlgpError::InvalidInput(_))));
    }

    #[test]
    fn kernel_matrix_limits() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 2.0]);
        let d = pairwise_sq_dist(&x).unwrap();
        let c = kernel_matrix(&d, 2.0, 0.0);
        assert!(c.iter().all(|&v| v == 2.0));
        let c = kernel_matrix(&d, 1.7, 3.0);
        for i in 0..3 {
            assert_eq!(c[(i, i)], 1.7);
        }
        let d = DistanceMatrix::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 2f64.ln(), 2f64.ln(), 0.0],
        ))
        .unwrap();
        assert_relative_eq!(kernel_matrix(&d, 1.0, 1.0)[(0, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn identity_limit_gives_identity_powers() {
        let d = pairwise_sq_dist(&DMatrix::from_row_slice(3, 1, &[0.0, 0.3, 0.9])).unwrap();
        let st = CovarianceState::new(KernelParams::new(1.0, 1e-300, 1.0), &d).unwrap();
        let eye = DMatrix::<f64>::identity(3, 3);
        for m in [st.shalf(), st.sinv(), st.sinv3(), st.sinv3half()] {
            assert!((m - &eye).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_sigma_has_analytic_powers() {
        let st = CovarianceState::from_sigma(DMatrix::from_diagonal(&DVector::from_vec(vec![
            4.0, 9.0,
        ])))
        .unwrap();
        assert!((st.shalf() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-14);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 8.0, 1.0 / 27.0]));
        assert!((st.sinv3() - expected).norm() < 1e-15);
        assert_relative_eq!(st.lambda_min_s(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn root_squares_back_on_a_kernel_covariance() {
        let x = DMatrix::from_fn(12, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let d = pairwise_sq_dist(&x).unwrap();
        let st = CovarianceState::new(KernelParams::new(0.05, 2.0, 1.5), &d).unwrap();
        let s = st.shalf();
        assert!(frob_rel(&(s * s), st.sigma()) < 1e-10);
        let eye = DMatrix::<f64>::identity(12, 12);
        assert!((st.sinv() * s - &eye).norm() < 1e-9);
        // S^{-3/2} squared is S^{-3}
        let h = st.sinv3half();
        assert!(frob_rel(&(h * h), st.sinv3()) < 1e-10);
        assert_eq!(st.lambda_min_s(), st.eigvals().min().sqrt());
    }

    #[test]
    fn near_singular_sigma_is_clamped() {
        // rank-one matrix
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let st = CovarianceState::from_sigma(&v * v.transpose()).unwrap();
        assert!(st.clamped_count() >= 2);
        assert!(st.lambda_min_s() > 0.0);
        assert!(st.sinv3().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn non_positive_sigma_is_an_error() {
        let m = DMatrix::from_diagonal_element(2, 2, -1.0);
        assert!(matches!(CovarianceState::from_sigma(m), Err(RlgpError::Numerical(_))));
    }

    #[test]
    fn nu_floor_rules() {
        assert_eq!(nu_floor(&[5.0, 5.0]), NU_FLOOR_ABS);
        assert_relative_eq!(nu_floor(&[0.0, 2.0]), 1e-8, epsilon = 1e-22);
    }
}
