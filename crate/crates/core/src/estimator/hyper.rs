//! Quasi-Newton update of the covariance block `χ = (ν, θ0, ϑ)`.
//!
//! The search runs on `z = (ln ν, ln θ0, ln ϑ)` inside a box, with
//! limited-memory secant updates and Armijo backtracking. Every accepted step
//! lowers the loss, so the block update never increases it.

use std::collections::VecDeque;

use nalgebra::{DVector, Vector3};

use crate::error::{Result, RlgpError};
use crate::estimator::objective::{grad_loss, loss};
use crate::kernel::{CovarianceState, DistanceMatrix, KernelParams};

const MEMORY: usize = 5;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;
/// Largest move of any log-parameter in one step.
const MAX_LOG_STEP: f64 = 4.0;

/// Box constraints on the covariance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiBounds {
    pub nu: (f64, f64),
    pub theta0: (f64, f64),
    pub vartheta: (f64, f64),
}

impl ChiBounds {
    /// Bounds scaled to the response variance, with `nu_floor` as the lower
    /// limit for both variances.
    pub fn for_responses(nu_floor: f64, response_var: f64) -> Self {
        let upper = 1e10 * response_var.max(1.0);
        Self {
            nu: (nu_floor, upper),
            theta0: (nu_floor, upper),
            vartheta: (1e-10, 1e10),
        }
    }

    fn log_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        (
            Vector3::new(self.nu.0.ln(), self.theta0.0.ln(), self.vartheta.0.ln()),
            Vector3::new(self.nu.1.ln(), self.theta0.1.ln(), self.vartheta.1.ln()),
        )
    }

    /// Projects parameters into the box.
    pub fn clamp(&self, p: KernelParams) -> KernelParams {
        KernelParams::new(
            p.nu.clamp(self.nu.0, self.nu.1),
            p.theta0.clamp(self.theta0.0, self.theta0.1),
            p.vartheta.clamp(self.vartheta.0, self.vartheta.1),
        )
    }
}

/// Why the quasi-Newton loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiStop {
    /// Projected log-gradient below tolerance.
    Stationary,
    /// Ran the allotted number of steps.
    StepLimit,
    /// No trial point lowered the loss; the last accepted parameters stand.
    LineSearchExhausted,
}

/// Result of a `χ` block update.
#[derive(Debug, Clone)]
pub struct ChiUpdate {
    pub params: KernelParams,
    pub cov: CovarianceState,
    pub loss: f64,
    /// Loss at the start and after each accepted step.
    pub trace: Vec<f64>,
    pub stop: ChiStop,
}

struct Point {
    params: KernelParams,
    z: Vector3<f64>,
    cov: CovarianceState,
    f: f64,
    g: Vector3<f64>,
}

fn to_params(z: &Vector3<f64>) -> KernelParams {
    KernelParams::new(z[0].exp(), z[1].exp(), z[2].exp())
}

fn evaluate_at(
    params: KernelParams,
    mu: f64,
    gamma: &DVector<f64>,
    d: &DistanceMatrix,
    y: &DVector<f64>,
    c0: f64,
) -> Result<(CovarianceState, f64)> {
    let cov = CovarianceState::new(params, d)?;
    let f = loss(mu, gamma, &cov, y, c0)?;
    Ok((cov, f))
}

fn log_gradient(
    cov: &CovarianceState,
    mu: f64,
    gamma: &DVector<f64>,
    d: &DistanceMatrix,
    y: &DVector<f64>,
    c0: f64,
) -> Result<Vector3<f64>> {
    let p = cov.params().expect("parametric covariance");
    let g = grad_loss(mu, gamma, cov, y, c0, d)?;
    Ok(Vector3::new(g.nu * p.nu, g.theta0 * p.theta0, g.vartheta * p.vartheta))
}

/// Zeroes components that point out of the box at active bounds.
fn project_gradient(g: &Vector3<f64>, z: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    let mut pg = *g;
    for k in 0..3 {
        if (z[k] <= lo[k] && g[k] > 0.0) || (z[k] >= hi[k] && g[k] < 0.0) {
            pg[k] = 0.0;
        }
    }
    pg
}

fn two_loop(g: &Vector3<f64>, memory: &VecDeque<(Vector3<f64>, Vector3<f64>)>) -> Vector3<f64> {
    let mut q = *g;
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / y.dot(s);
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push((a, rho));
    }
    if let Some((s, y)) = memory.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    -q
}

/// Runs at most `qn_steps` quasi-Newton iterations on `χ` with `μ` and `γ`
/// fixed. Returns parameters whose loss is no larger than at the start.
#[allow(clippy::too_many_arguments)]
pub fn update_chi(
    mu: f64,
    gamma: &DVector<f64>,
    params: KernelParams,
    d: &DistanceMatrix,
    y: &DVector<f64>,
    c0: f64,
    qn_steps: usize,
    bounds: ChiBounds,
) -> Result<ChiUpdate> {
    if y.len() != d.n() || gamma.len() != d.n() {
        return Err(RlgpError::DimensionMismatch {
            expected: d.n(),
            found: y.len().max(gamma.len()),
        });
    }
    let (lo, hi) = bounds.log_box();
    let start = bounds.clamp(params);
    let z0 = Vector3::new(start.nu.ln(), start.theta0.ln(), start.vartheta.ln());
    let (cov, f) = evaluate_at(start, mu, gamma, d, y, c0)?;
    let g = log_gradient(&cov, mu, gamma, d, y, c0)?;
    let mut cur = Point { params: start, z: z0, cov, f, g };
    let mut trace = vec![cur.f];
    let mut memory: VecDeque<(Vector3<f64>, Vector3<f64>)> = VecDeque::with_capacity(MEMORY);
    let mut stop = ChiStop::StepLimit;

    for _ in 0..qn_steps {
        let pg = project_gradient(&cur.g, &cur.z, &lo, &hi);
        if pg.amax() <= 1e-10 * cur.f.abs().max(1.0) {
            stop = ChiStop::Stationary;
            break;
        }
        let mut dir = two_loop(&pg, &memory);
        if dir.dot(&pg) >= 0.0 || !dir.iter().all(|v| v.is_finite()) {
            memory.clear();
            dir = -pg;
        }
        for k in 0..3 {
            if (cur.z[k] <= lo[k] && dir[k] < 0.0) || (cur.z[k] >= hi[k] && dir[k] > 0.0) {
                dir[k] = 0.0;
            }
        }
        let mut step = 1.0;
        if memory.is_empty() || dir.amax() > MAX_LOG_STEP {
            step = (MAX_LOG_STEP / dir.amax()).min(1.0);
        }

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut z = cur.z + dir * step;
            for k in 0..3 {
                z[k] = z[k].clamp(lo[k], hi[k]);
            }
            let decrease = cur.g.dot(&(z - cur.z));
            let trial = bounds.clamp(to_params(&z));
            if let Ok((cov, f)) = evaluate_at(trial, mu, gamma, d, y, c0) {
                if f.is_finite() && f <= cur.f + ARMIJO_C1 * decrease.min(0.0) && f <= cur.f {
                    accepted = Some((trial, z, cov, f));
                    break;
                }
            }
            step *= BACKTRACK;
        }
        let Some((trial, z, cov, f)) = accepted else {
            stop = ChiStop::LineSearchExhausted;
            break;
        };
        let g = log_gradient(&cov, mu, gamma, d, y, c0)?;
        let s = z - cur.z;
        let yk = g - cur.g;
        if s.dot(&yk) > 1e-12 * s.norm() * yk.norm() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, yk));
        }
        cur = Point { params: trial, z, cov, f, g };
        trace.push(cur.f);
    }

    Ok(ChiUpdate {
        params: cur.params,
        cov: cur.cov,
        loss: cur.f,
        trace,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn bounds() -> ChiBounds {
        ChiBounds::for_responses(1e-10, 1.0)
    }

    #[test]
    fn single_point_shrinks_toward_the_floors() {
        let d = DistanceMatrix::from_matrix(DMatrix::zeros(1, 1)).unwrap();
        let y = DVector::from_vec(vec![2.0]);
        let gamma = DVector::zeros(1);
        let start = KernelParams::new(1.0, 1.0, 1.0);
        let up = update_chi(2.0, &gamma, start, &d, &y, 1.0, 10, bounds()).unwrap();
        // loss = ½ sqrt(ν + θ0)
        assert!((up.trace[0] - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!(up.params.nu < 0.01 && up.params.theta0 < 0.01);
        assert!(up.loss < up.trace[0]);
        assert!((up.loss - 0.5 * (up.params.nu + up.params.theta0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stationary_start_is_left_alone() {
        // minimizer of ½ r²/sqrt(ν+θ0) + ½ sqrt(ν+θ0) is ν+θ0 = r², any split
        let d = DistanceMatrix::from_matrix(DMatrix::zeros(1, 1)).unwrap();
        let y = DVector::from_vec(vec![3.0]);
        let start = KernelParams::new(4.0, 5.0, 1.0);
        let up = update_chi(0.0, &DVector::zeros(1), start, &d, &y, 1.0, 10, bounds()).unwrap();
        assert_eq!(up.stop, ChiStop::Stationary);
        assert_eq!(up.params.nu, start.nu);
        assert_eq!(up.params.theta0, start.theta0);
        assert_eq!(up.trace.len(), 1);
    }

    #[test]
    fn trace_is_non_increasing() {
        let x = DMatrix::from_fn(8, 2, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0 - 0.5);
        let d = crate::kernel::pairwise_sq_dist(&x).unwrap();
        let y = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin() * 2.0 + 1.0);
        let up = update_chi(1.0, &DVector::zeros(8), KernelParams::new(0.5, 1.0, 1.0), &d, &y, 1.0, 10, bounds())
            .unwrap();
        for w in up.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(up.loss < up.trace[0]);
    }
}
