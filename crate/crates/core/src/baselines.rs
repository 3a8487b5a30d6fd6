//! Rowwise reference estimators: least squares, fast-S and MM regression.
//!
//! The S-estimator follows the usual fast-S scheme: random elemental
//! subsets give starting fits, each is improved by a few IRLS steps, and the
//! candidates with the smallest M-scale are iterated to convergence. The MM
//! estimator then runs IRLS with a high-efficiency ρ while holding the
//! S-scale fixed.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::linalg::{lstsq_named, residuals, weighted_lstsq, with_intercept};
use crate::mscale::{solve_mscale_target, starting_scale};
use crate::rho::{tune_for_bdp, tune_for_efficiency, RhoKind, RhoSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ls,
    S,
    Mm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slopes: Vec<f64>,
    pub intercept: f64,
    /// RMS residual for LS, M-scale for S and MM.
    pub scale: f64,
    pub method: FitMethod,
}

impl LinearFit {
    fn from_coef(coef: &DVector<f64>, scale: f64, method: FitMethod) -> Self {
        LinearFit { slopes: coef.iter().skip(1).copied().collect(), intercept: coef[0], scale, method }
    }

    fn coef(&self) -> DVector<f64> {
        DVector::from_iterator(self.slopes.len() + 1, std::iter::once(self.intercept).chain(self.slopes.iter().copied()))
    }

    pub fn residuals(&self, data: &RegressionData) -> Vec<f64> {
        residuals(&with_intercept(&data.x), data.y.as_slice(), &self.coef())
    }
}

/// Knobs of the fast-S search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastSOptions {
    pub n_subsamples: usize,
    /// IRLS steps applied to every elemental start.
    pub k_refine: usize,
    /// Number of best candidates iterated to convergence.
    pub best_r: usize,
    pub seed: u64,
    pub max_refine_steps: usize,
    /// Full refinement stops once no residual moves by more than this
    /// multiple of the current scale.
    pub refine_tol: f64,
    /// M-step tolerance used for every scale solve.
    pub scale_eps: f64,
    /// Solve Σρ(rᵢ/s) = (n - p - 1)·δ instead of n·δ, which offsets the
    /// downward bias of the minimized scale in small samples.
    pub dof_correction: bool,
}

impl Default for FastSOptions {
    fn default() -> Self {
        FastSOptions {
            n_subsamples: 500,
            k_refine: 2,
            best_r: 5,
            seed: 0,
            max_refine_steps: 200,
            refine_tol: 1e-7,
            scale_eps: 1e-8,
            dof_correction: true,
        }
    }
}

impl FastSOptions {
    pub fn with_seed(seed: u64) -> Self {
        FastSOptions { seed, ..Default::default() }
    }
}

/// S-fit together with the scales of the retained candidates.
#[derive(Debug, Clone)]
pub struct SFitDetails {
    pub fit: LinearFit,
    /// Final M-scales of the fully refined candidates, in retention order.
    pub candidate_scales: Vec<f64>,
    pub degenerate_subsamples: usize,
}

fn check_size(data: &RegressionData) -> Result<()> {
    data.validate()?;
    if data.n() <= data.p() + 1 {
        return Err(Error::InvalidArgument(format!(
            "need n > p + 1 observations, got n = {} and p = {}",
            data.n(),
            data.p()
        )));
    }
    Ok(())
}

/// Ordinary least squares with intercept.
pub fn ls_fit(data: &RegressionData) -> Result<LinearFit> {
    data.validate()?;
    let design = with_intercept(&data.x);
    let coef = lstsq_named(&design, data.y.as_slice(), None, &data.names)?;
    let res = residuals(&design, data.y.as_slice(), &coef);
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(LinearFit::from_coef(&coef, rms, FitMethod::Ls))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Problem<'a> {
    design: DMatrix<f64>,
    y: &'a [f64],
    /// Fraction of n·δ the summed ρ must reach.
    dof_factor: f64,
}

impl Problem<'_> {
    fn scale_of(&self, res: &[f64], spec: &RhoSpec, s_prev: Option<f64>, eps: f64) -> Result<f64> {
        let s0 = match s_prev {
            Some(s) if s > 0.0 => s,
            _ => starting_scale(res)?,
        };
        if s0 == 0.0 {
            return Ok(0.0);
        }
        Ok(solve_mscale_target(res, spec, spec.delta() * self.dof_factor, s0, eps)?.s)
    }

    /// One IRLS step with weights ρ'(r/s)/(r/s); `None` if every weight is 0
    /// or the weighted design is singular.
    fn irls_step(&self, res: &[f64], spec: &RhoSpec, s: f64) -> Option<DVector<f64>> {
        let w: Vec<f64> = res.iter().map(|r| spec.weight(r / s)).collect();
        weighted_lstsq(&self.design, self.y, Some(&w)).ok()
    }

    /// Iterates S-IRLS (weights from the current M-scale) for at most
    /// `steps` steps, or to convergence when `tol` is given.
    fn refine(&self, mut coef: DVector<f64>, spec: &RhoSpec, steps: usize, tol: Option<f64>, eps: f64) -> Result<(DVector<f64>, f64)> {
        let mut res = residuals(&self.design, self.y, &coef);
        let mut s = self.scale_of(&res, spec, None, eps)?;
        for _ in 0..steps {
            if s == 0.0 {
                break;
            }
            let Some(next) = self.irls_step(&res, spec, s) else { break };
            coef = next;
            let next_res = residuals(&self.design, self.y, &coef);
            let change = max_abs_diff(&next_res, &res) / s;
            res = next_res;
            s = self.scale_of(&res, spec, Some(s), eps)?;
            if tol.is_some_and(|t| change < t) {
                break;
            }
        }
        Ok((coef, s))
    }
}

/// Fast-S regression with ρ-function `spec`.
pub fn s_fit(data: &RegressionData, spec: &RhoSpec, opts: &FastSOptions) -> Result<LinearFit> {
    s_fit_with_details(data, spec, opts).map(|d| d.fit)
}

pub fn s_fit_with_details(data: &RegressionData, spec: &RhoSpec, opts: &FastSOptions) -> Result<SFitDetails> {
    check_size(data)?;
    if opts.n_subsamples == 0 || opts.best_r == 0 {
        return Err(Error::InvalidArgument("fast-S needs at least one subsample and one candidate".into()));
    }
    let (n, m) = (data.n(), data.p() + 1);
    let dof_factor = if opts.dof_correction { (n - m) as f64 / n as f64 } else { 1.0 };
    let problem = Problem { design: with_intercept(&data.x), y: data.y.as_slice(), dof_factor };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best: Vec<(f64, DVector<f64>)> = Vec::with_capacity(opts.best_r + 1);
    let mut degenerate = 0usize;
    const MAX_REDRAWS: usize = 50;

    for _ in 0..opts.n_subsamples {
        let mut start = None;
        for _ in 0..MAX_REDRAWS {
            let mut idx = index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let sub = problem.design.select_rows(idx.iter());
            let ysub: Vec<f64> = idx.iter().map(|&i| problem.y[i]).collect();
            match weighted_lstsq(&sub, &ysub, None) {
                Ok(c) if c.iter().all(|v| v.is_finite()) => {
                    start = Some(c);
                    break;
                }
                _ => degenerate += 1,
            }
        }
        let Some(start) = start else { continue };
        let (coef, s) = problem.refine(start, spec, opts.k_refine, None, opts.scale_eps)?;
        if !s.is_finite() {
            continue;
        }
        if s == 0.0 {
            // exact fit of the majority: nothing can beat it
            return Ok(SFitDetails {
                fit: LinearFit::from_coef(&coef, 0.0, FitMethod::S),
                candidate_scales: vec![0.0],
                degenerate_subsamples: degenerate,
            });
        }
        let pos = best.partition_point(|(bs, _)| *bs <= s);
        if pos < opts.best_r {
            best.insert(pos, (s, coef));
            best.truncate(opts.best_r);
        }
    }
    if best.is_empty() {
        return Err(Error::Estimation(format!(
            "no non-degenerate elemental subsample among {} draws",
            degenerate
        )));
    }

    let mut candidate_scales = Vec::with_capacity(best.len());
    let mut winner: Option<(f64, DVector<f64>)> = None;
    for (_, coef) in best {
        let (coef, s) = problem.refine(coef, spec, opts.max_refine_steps, Some(opts.refine_tol), opts.scale_eps)?;
        candidate_scales.push(s);
        if winner.as_ref().is_none_or(|(ws, _)| s < *ws) {
            winner = Some((s, coef));
        }
    }
    let (s, coef) = winner.expect("at least one candidate");
    Ok(SFitDetails {
        fit: LinearFit::from_coef(&coef, s, FitMethod::S),
        candidate_scales,
        degenerate_subsamples: degenerate,
    })
}

/// MM-regression with constants tuned for breakdown point `bdp` (S stage)
/// and normal efficiency `eff` (M stage).
pub fn mm_fit(data: &RegressionData, kind: RhoKind, bdp: f64, eff: f64, opts: &FastSOptions) -> Result<LinearFit> {
    let s_rho = tune_for_bdp(kind, bdp)?;
    let m_rho = tune_for_efficiency(kind, eff)?;
    mm_fit_with(data, &s_rho, &m_rho, opts)
}

/// MM-regression with pre-tuned ρ-functions. The returned scale is the
/// S-stage scale, held fixed during the M stage.
pub fn mm_fit_with(data: &RegressionData, s_rho: &RhoSpec, m_rho: &RhoSpec, opts: &FastSOptions) -> Result<LinearFit> {
    let s = s_fit(data, s_rho, opts)?;
    let scale = s.scale;
    let mut coef = s.coef();
    if scale > 0.0 {
        let design = with_intercept(&data.x);
        let y = data.y.as_slice();
        let mut res = residuals(&design, y, &coef);
        for _ in 0..opts.max_refine_steps.max(1) {
            let w: Vec<f64> = res.iter().map(|r| m_rho.weight(r / scale)).collect();
            let Ok(next) = weighted_lstsq(&design, y, Some(&w)) else { break };
            coef = next;
            let next_res = residuals(&design, y, &coef);
            let change = max_abs_diff(&next_res, &res) / scale;
            res = next_res;
            if change < opts.refine_tol {
                break;
            }
        }
    }
    Ok(LinearFit::from_coef(&coef, scale, FitMethod::Mm))
}
