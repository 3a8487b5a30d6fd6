//! Simple S-regression of a partial response on one predictor plus an
//! intercept, computed with IRLS: each I-step is a weighted LS fit followed
//! by an M-scale solve on the new residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mscale::{solve_mscale, starting_scale};
use crate::rho::RhoSpec;
use crate::stats::median_in_place;

/// Maximum number of I-steps per simple fit.
pub const MAX_I_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleSFit {
    pub slope: f64,
    pub intercept: f64,
    pub scale: f64,
    /// ỹᵢ - xᵢ·slope - intercept.
    pub residuals: Vec<f64>,
    pub i_steps: usize,
    pub converged: bool,
}

/// Closed-form weighted LS line minimizing Σ wᵢ (yᵢ - a - b xᵢ)².
/// Returns `(slope, intercept)`.
pub fn weighted_ls_simple(y: &[f64], x: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    if y.len() != x.len() || x.len() != w.len() {
        return Err(Error::InvalidArgument("weighted_ls_simple: length mismatch".into()));
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::DegenerateDesign("all regression weights are zero".into()));
    }
    let xbar = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - xbar;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ybar);
    }
    if !(sxx > 1e-26 * sw * xbar.abs().max(1e-150).powi(2)) {
        return Err(Error::DegenerateDesign("predictor has zero weighted variance".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, ybar - slope * xbar))
}

fn residuals_of(ytilde: &[f64], x: &[f64], slope: f64, intercept: f64) -> Vec<f64> {
    ytilde.iter().zip(x).map(|(y, x)| y - x * slope - intercept).collect()
}

/// Residuals at rounding level relative to the data count as an exact fit.
fn is_exact_fit(res: &[f64], ytilde: &[f64]) -> bool {
    let reference = ytilde.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    res.iter().all(|r| r.abs() <= 1e-12 * reference)
}

/// IRLS S-regression of `ytilde` on `x`, started from slope `beta_init`
/// (residuals median-centered) and scale `s_init`. Stops once the largest
/// absolute change of the residuals between I-steps drops below `eps2`.
pub fn simple_s_fit(
    ytilde: &[f64],
    x: &[f64],
    spec: &RhoSpec,
    beta_init: f64,
    s_init: f64,
    eps1: f64,
    eps2: f64,
) -> Result<SimpleSFit> {
    if ytilde.len() != x.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("simple_s_fit needs two equal-length vectors, n >= 2".into()));
    }
    let mut centered: Vec<f64> = residuals_of(ytilde, x, beta_init, 0.0);
    let shift = median_in_place(&mut centered.clone());
    centered.iter_mut().for_each(|r| *r -= shift);

    let mut slope = beta_init;
    let mut intercept = shift;
    let mut res = centered;
    if is_exact_fit(&res, ytilde) {
        return Ok(SimpleSFit { slope, intercept, scale: 0.0, residuals: res, i_steps: 0, converged: true });
    }

    let mut scale = s_init;
    let mut weights: Vec<f64> = if s_init > 0.0 {
        res.iter().map(|r| spec.weight(r / s_init)).collect()
    } else {
        vec![1.0; res.len()]
    };

    for step in 1..=MAX_I_STEPS {
        if weights.iter().all(|w| *w == 0.0) {
            return Ok(SimpleSFit { slope, intercept, scale, residuals: res, i_steps: step - 1, converged: false });
        }
        let (b, a) = weighted_ls_simple(ytilde, x, &weights)?;
        let next = residuals_of(ytilde, x, b, a);
        slope = b;
        intercept = a;
        if is_exact_fit(&next, ytilde) {
            return Ok(SimpleSFit { slope, intercept, scale: 0.0, residuals: next, i_steps: step, converged: true });
        }
        let s0 = if step == 1 || !(scale > 0.0) { starting_scale(&next)? } else { scale };
        scale = solve_mscale(&next, spec, s0, eps1)?.s;
        let change = next.iter().zip(&res).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        res = next;
        if scale > 0.0 {
            weights.iter_mut().zip(&res).for_each(|(w, r)| *w = spec.weight(r / scale));
        }
        if change < eps2 {
            return Ok(SimpleSFit { slope, intercept, scale, residuals: res, i_steps: step, converged: true });
        }
    }
    Ok(SimpleSFit { slope, intercept, scale, residuals: res, i_steps: MAX_I_STEPS, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn bw() -> RhoSpec {
        RhoSpec::biweight(3.42).unwrap()
    }

    /// Ordinary simple LS via the 2x2 normal equations, solved by Cramer's rule.
    fn normal_equations_oracle(y: &[f64], x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    }

    fn sample(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = Normal::new(0.0, 1.0).unwrap();
        let ne = Normal::new(0.0, 0.1).unwrap();
        let x: Vec<f64> = (0..n).map(|_| nx.sample(&mut rng)).collect();
        let y = x.iter().map(|v| v + ne.sample(&mut rng)).collect();
        (x, y)
    }

    #[test]
    fn wls_examples() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let (b, a) = weighted_ls_simple(&y, &x, &[1.0; 4]).unwrap();
        assert_relative_eq!(b, 2.0, max_relative = 1e-14);
        assert_relative_eq!(a, 1.0, max_relative = 1e-14);

        let (b, a) = weighted_ls_simple(&[5.0, 0.0, 7.0, 1.0], &x, &[0.0, 1.0, 0.0, 1.0]).unwrap();
        // line through (1, 0) and (3, 1)
        assert_relative_eq!(b, 0.5, max_relative = 1e-14);
        assert_relative_eq!(a, -0.5, max_relative = 1e-14);

        let (x, y) = sample(37, 4);
        let (b, a) = weighted_ls_simple(&y, &x, &vec![1.0; 37]).unwrap();
        let (bo, ao) = normal_equations_oracle(&y, &x);
        assert!((b - bo).abs() < 1e-10 && (a - ao).abs() < 1e-10);
    }

    #[test]
    fn wls_degenerate_errors() {
        assert!(matches!(weighted_ls_simple(&[1.0, 2.0], &[3.0, 3.0], &[1.0, 1.0]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(weighted_ls_simple(&[1.0, 2.0], &[1.0, 3.0], &[0.0, 0.0]), Err(Error::DegenerateDesign(_))));
        assert!(weighted_ls_simple(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn exact_line_short_circuits() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        for spec in [bw(), RhoSpec::skipped_huber(2.177).unwrap()] {
            let fit = simple_s_fit(&y, &x, &spec, 0.0, 1.0, 1e-6, 1e-6).unwrap();
            assert_relative_eq!(fit.slope, 3.0, max_relative = 1e-12);
            assert_relative_eq!(fit.intercept, -2.0, max_relative = 1e-12);
            assert_eq!(fit.scale, 0.0);
            assert!(fit.converged);
            let started_exact = simple_s_fit(&y, &x, &spec, 3.0, 1.0, 1e-6, 1e-6).unwrap();
            assert_eq!(started_exact.i_steps, 0);
        }
    }

    #[test]
    fn single_outlier_is_ignored() {
        let (x, mut y) = sample(50, 21);
        let clean_y: Vec<f64> = y[1..].to_vec();
        let (clean_slope, _) = normal_equations_oracle(&clean_y, &x[1..]);
        y[0] += 100.0;
        let fit = simple_s_fit(&y, &x, &bw(), 0.0, 1.0, 1e-6, 1e-6).unwrap();
        assert!(fit.converged);
        assert!((fit.slope - clean_slope).abs() <= 0.05 * clean_slope.abs(), "{} vs {}", fit.slope, clean_slope);
    }

    #[test]
    fn residual_identity_and_stop_rule() {
        let (x, y) = sample(40, 2);
        let fit = simple_s_fit(&y, &x, &bw(), 0.3, 0.5, 1e-6, 1e-6).unwrap();
        for i in 0..x.len() {
            assert_eq!(fit.residuals[i], y[i] - x[i] * fit.slope - fit.intercept);
        }
        assert!(fit.i_steps <= MAX_I_STEPS);
        // fixed point: one more weighted LS with the final weights changes little
        let w: Vec<f64> = fit.residuals.iter().map(|r| bw().weight(r / fit.scale)).collect();
        let (b, a) = weighted_ls_simple(&y, &x, &w).unwrap();
        assert!((b - fit.slope).abs() < 1e-5 && (a - fit.intercept).abs() < 1e-5);
    }

    #[test]
    fn location_scale_equivariance() {
        let (x, y) = sample(60, 9);
        let base = simple_s_fit(&y, &x, &bw(), 0.0, 1.0, 1e-9, 1e-10).unwrap();
        let (a, c) = (4.0, -2.5);
        let y2: Vec<f64> = y.iter().map(|v| a + c * v).collect();
        let moved = simple_s_fit(&y2, &x, &bw(), 0.0, c.abs(), 1e-9, 1e-10 * c.abs()).unwrap();
        assert_relative_eq!(moved.slope, c * base.slope, max_relative = 1e-6);
        assert_relative_eq!(moved.intercept, a + c * base.intercept, max_relative = 1e-6);
        assert_relative_eq!(moved.scale, c.abs() * base.scale, max_relative = 1e-6);
    }

    #[test]
    fn all_weights_zero_flags_non_convergence() {
        let (x, y) = sample(20, 3);
        // a tiny starting scale rejects every point under the biweight
        let fit = simple_s_fit(&y, &x, &bw(), 10.0, 1e-9, 1e-6, 1e-6).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.i_steps, 0);
        assert_eq!(fit.slope, 10.0);
    }
}
