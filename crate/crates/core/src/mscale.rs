//! M-estimator of scale: the solution s of (1/n) Σ ρ(rᵢ/s) = δ, found by
//! the fixed-point M-step s ← s·√(mean ρ(r/s) / δ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rho::RhoSpec;
use crate::stats::{median_in_place, MAD_CONSISTENCY};

/// Maximum number of M-steps per scale solve.
pub const MAX_M_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSolution {
    pub s: f64,
    pub m_steps: usize,
    pub converged: bool,
}

/// `1.4826 * median |r|`.
pub fn initial_scale(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("scale of an empty residual vector".into()));
    }
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    Ok(MAD_CONSISTENCY * median_in_place(&mut abs))
}

/// [`initial_scale`], falling back to `1.4826 * mean |r|` when more than half
/// of the residuals are zero. Returns 0 only for an all-zero vector.
pub fn starting_scale(residuals: &[f64]) -> Result<f64> {
    let s = initial_scale(residuals)?;
    if s > 0.0 {
        return Ok(s);
    }
    let mean_abs = residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64;
    Ok(MAD_CONSISTENCY * mean_abs)
}

/// Mean of ρ(r/s) over the residuals.
#[inline]
pub fn mean_rho(residuals: &[f64], spec: &RhoSpec, s: f64) -> f64 {
    let inv = 1.0 / s;
    residuals.iter().map(|r| spec.rho(r * inv)).sum::<f64>() / residuals.len() as f64
}

/// Iterates M-steps from `s0` until |s_ℓ/s_{ℓ-1} - 1| < `eps1` or the step
/// cap is hit (then `converged` is false and the last iterate is returned).
pub fn solve_mscale(residuals: &[f64], spec: &RhoSpec, s0: f64, eps1: f64) -> Result<ScaleSolution> {
    solve_mscale_target(residuals, spec, spec.delta(), s0, eps1)
}

/// [`solve_mscale`] with right-hand side `delta` in place of E[ρ(Z)].
pub fn solve_mscale_target(residuals: &[f64], spec: &RhoSpec, delta: f64, s0: f64, eps1: f64) -> Result<ScaleSolution> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("scale of an empty residual vector".into()));
    }
    if residuals.iter().all(|r| *r == 0.0) {
        return Ok(ScaleSolution { s: 0.0, m_steps: 0, converged: true });
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidArgument(format!("starting scale must be positive, got {s0}")));
    }
    if !(eps1 > 0.0) {
        return Err(Error::InvalidArgument(format!("eps1 must be positive, got {eps1}")));
    }
    if !(delta > 0.0 && delta < spec.rho_sup()) {
        return Err(Error::InvalidArgument(format!("scale target {delta} outside (0, sup rho)")));
    }
    let mut s = s0;
    for step in 1..=MAX_M_STEPS {
        let next = s * (mean_rho(residuals, spec, s) / delta).sqrt();
        let ratio = next / s;
        s = next;
        if (ratio - 1.0).abs() < eps1 {
            return Ok(ScaleSolution { s, m_steps: step, converged: true });
        }
        if !(s > 0.0) {
            break;
        }
    }
    Ok(ScaleSolution { s, m_steps: MAX_M_STEPS, converged: false })
}
