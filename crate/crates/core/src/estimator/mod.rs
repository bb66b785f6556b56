//! Robust local GP estimation by block coordinate descent.
//!
//! One outer pass updates, in order: the outlyingness vector `γ` (inner
//! quantile-thresholding loop with `S` frozen), the location `μ` (closed
//! form), and the covariance parameters `χ = (ν, θ0, ϑ)` (quasi-Newton), then
//! rebuilds `S`. Each block step is a descent step, so the recorded loss is
//! non-increasing.

pub mod hyper;
pub mod objective;
pub mod sparse;

use nalgebra::DVector;

use crate::error::{Result, RlgpError};
use crate::kernel::{nu_floor, CovarianceState, KernelParams};
use crate::neighborhood::Neighborhood;
use crate::stats::{mad, median, variance, MAD_SCALE};

pub use hyper::{update_chi, ChiBounds, ChiStop, ChiUpdate};
pub use objective::{grad_gamma, grad_loss, loss, residual, surrogate, LossGradient};
pub use sparse::{
    quantile_threshold, update_gamma, update_mu, GammaOptions, GammaUpdate, OutlyingnessVector,
    RHO_SAFETY,
};

/// How the trimming level `q` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QMode {
    /// A fixed number of potential outliers.
    Count(usize),
    /// A fraction of the neighborhood size, rounded half-up.
    Fraction(f64),
    /// Number of responses outside `Med(y) ± τ·MAD(y)`.
    Adaptive,
}

impl std::str::FromStr for QMode {
    type Err = RlgpError;

    /// Accepts `adaptive`, a non-negative integer count, or a fraction of the
    /// neighborhood size written as `.15n` / `0.15n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || RlgpError::Config(format!("cannot parse q spec {s:?} (expected adaptive, an integer, or e.g. 0.15n)"));
        if s == "adaptive" {
            return Ok(QMode::Adaptive);
        }
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            return s.parse().map(QMode::Count).map_err(|_| bad());
        }
        let frac = s.strip_suffix('n').ok_or_else(bad)?;
        let digits = frac.strip_prefix('0').unwrap_or(frac);
        let decimals = digits.strip_prefix('.').ok_or_else(bad)?;
        if decimals.is_empty() || !decimals.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        frac.parse().map(QMode::Fraction).map_err(|_| bad())
    }
}

/// Choice of the trace weight `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C0Mode {
    /// `c0 = 1`.
    One,
    /// `c0 = (n − q)/n`, fixed once `q` is resolved.
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub q_mode: QMode,
    /// MAD multiplier for adaptive `q`.
    pub tau: f64,
    pub c0_mode: C0Mode,
    pub max_outer: usize,
    pub max_inner_gamma: usize,
    /// Relative loss decrease below which the outer loop stops.
    pub tol_outer: f64,
    pub tol_gamma: f64,
    /// Quasi-Newton iterations per outer pass.
    pub qn_steps: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            q_mode: QMode::Adaptive,
            tau: 3.0,
            c0_mode: C0Mode::One,
            max_outer: 100,
            max_inner_gamma: 100,
            tol_outer: 1e-8,
            tol_gamma: 1e-10,
            qn_steps: 10,
        }
    }
}

impl EstimatorConfig {
    pub fn with_q(mut self, q_mode: QMode) -> Self {
        self.q_mode = q_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RlgpError::Config(m.to_string()));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if self.max_outer == 0 || self.max_inner_gamma == 0 {
            return bad("iteration caps must be at least 1");
        }
        if !(self.tol_outer >= 0.0 && self.tol_gamma >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if let QMode::Fraction(a) = self.q_mode {
            if !(a.is_finite() && a >= 0.0) {
                return bad("q fraction must be a non-negative number");
            }
        }
        Ok(())
    }
}

/// Number of entries outside `Med(y) ± τ·MAD(y)`. With a zero MAD the
/// interval collapses to the median and every value that differs counts.
pub fn adaptive_q(y: &[f64], tau: f64) -> usize {
    let center = median(y);
    let spread = tau * mad(y);
    y.iter().filter(|v| (*v - center).abs() > spread).count()
}

/// Resolves the trimming level for a neighborhood, clamped to `[0, ⌊n/2⌋]`.
pub fn resolve_q(y: &[f64], config: &EstimatorConfig) -> usize {
    let n = y.len();
    let raw = match config.q_mode {
        QMode::Count(q) => q,
        QMode::Fraction(a) => (a * n as f64 + 0.5).floor().max(0.0) as usize,
        QMode::Adaptive => adaptive_q(y, config.tau),
    };
    raw.min(n / 2)
}

/// Starting point of the estimator.
#[derive(Debug, Clone)]
pub struct Initialization {
    pub mu: f64,
    pub gamma: DVector<f64>,
    pub params: KernelParams,
    /// `S(0) = ν0 I`.
    pub s0: CovarianceState,
    pub nu_floor: f64,
}

/// `γ = 0`, `μ = Med(y)`, `ν = (1.483 · Med|y − μ|)²` (floored),
/// `θ0 = ϑ = 1`, `S = ν I`.
pub fn initialize(y: &[f64]) -> Result<Initialization> {
    if y.is_empty() {
        return Err(RlgpError::InvalidInput("cannot initialize on empty responses".into()));
    }
    let floor = nu_floor(y);
    let mu = median(y);
    let abs_dev: Vec<f64> = y.iter().map(|v| (v - mu).abs()).collect();
    let nu = (MAD_SCALE * median(&abs_dev)).powi(2).max(floor);
    Ok(Initialization {
        mu,
        gamma: DVector::zeros(y.len()),
        params: KernelParams::new(nu, 1.0, 1.0),
        s0: CovarianceState::scaled_identity(y.len(), nu)?,
        nu_floor: floor,
    })
}

/// Per-fit bookkeeping beyond the estimates themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub outer_iterations: usize,
    pub converged: bool,
    pub nu_floor: f64,
    /// Inner `γ` iterations used in each outer pass.
    pub gamma_iterations: Vec<usize>,
    /// Outer passes whose inner loop hit its cap.
    pub gamma_cap_hits: usize,
    /// Outer passes whose line search could not improve `χ`.
    pub chi_exhausted: usize,
}

/// Estimates for one neighborhood.
#[derive(Debug, Clone)]
pub struct FittedLocalModel {
    pub mu: f64,
    pub gamma: OutlyingnessVector,
    pub params: KernelParams,
    pub q_used: usize,
    pub c0: f64,
    /// Loss at the end of every outer pass.
    pub loss_trace: Vec<f64>,
    /// Largest `‖γ‖₀` seen during every outer pass (including inner iterates).
    pub support_trace: Vec<usize>,
    pub cov: CovarianceState,
    pub neighborhood: Neighborhood,
    pub diagnostics: FitDiagnostics,
}

impl FittedLocalModel {
    /// Global training-row indices flagged as outliers, with their shifts.
    pub fn outliers(&self) -> Vec<(usize, f64)> {
        self.gamma
            .support
            .iter()
            .map(|&i| (self.neighborhood.indices[i], self.gamma.gamma[i]))
            .collect()
    }
}

/// Fits the robust local model on one neighborhood.
pub fn fit(nb: &Neighborhood, config: &EstimatorConfig) -> Result<FittedLocalModel> {
    config.validate()?;
    let n = nb.n();
    if n == 0 {
        return Err(RlgpError::InvalidInput("empty neighborhood".into()));
    }
    let y = &nb.y;
    let y_slice = y.as_slice();
    let q = resolve_q(y_slice, config);
    let c0 = match config.c0_mode {
        C0Mode::One => 1.0,
        C0Mode::Corrected => (n - q) as f64 / n as f64,
    };
    let init = initialize(y_slice)?;
    let bounds = ChiBounds::for_responses(init.nu_floor, variance(y_slice));
    let gamma_opts = GammaOptions {
        max_iter: config.max_inner_gamma,
        tol: config.tol_gamma,
        rho: None,
    };

    let mut mu = init.mu;
    let mut gamma = init.gamma;
    let mut params = bounds.clamp(init.params);
    let mut cov = init.s0;
    let mut loss_trace = Vec::new();
    let mut support_trace = Vec::new();
    let mut diag = FitDiagnostics {
        outer_iterations: 0,
        converged: false,
        nu_floor: init.nu_floor,
        gamma_iterations: Vec::new(),
        gamma_cap_hits: 0,
        chi_exhausted: 0,
    };

    let fail = |t: usize, p: KernelParams, e: RlgpError| RlgpError::FitFailed {
        iteration: t,
        nu: p.nu,
        theta0: p.theta0,
        vartheta: p.vartheta,
        message: e.to_string(),
    };

    for t in 0..config.max_outer {
        let up = update_gamma(&gamma, &cov, mu, y, q, gamma_opts).map_err(|e| fail(t, params, e))?;
        diag.gamma_iterations.push(up.iterations);
        if !up.converged {
            diag.gamma_cap_hits += 1;
        }
        support_trace.push(up.max_support);
        gamma = up.gamma.gamma;

        mu = update_mu(&cov, y, &gamma).map_err(|e| fail(t, params, e))?;

        let chi = update_chi(mu, &gamma, params, &nb.distances, y, c0, config.qn_steps, bounds)
            .map_err(|e| fail(t, params, e))?;
        if chi.stop == ChiStop::LineSearchExhausted {
            diag.chi_exhausted += 1;
        }
        params = chi.params;
        cov = chi.cov;
        let current = chi.loss;
        diag.outer_iterations = t + 1;

        let previous = loss_trace.last().copied();
        loss_trace.push(current);
        if let Some(prev) = previous {
            let rel = (prev - current) / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.tol_outer {
                diag.converged = true;
                break;
            }
        }
    }

    Ok(FittedLocalModel {
        mu,
        gamma: OutlyingnessVector::from_vector(gamma),
        params,
        q_used: q,
        c0,
        loss_trace,
        support_trace,
        cov,
        neighborhood: nb.clone(),
        diagnostics: diag,
    })
}
