//! The shooting S-estimator.
//!
//! Coordinate descent over the predictors where every coordinate update is
//! a simple S-regression of a partial response on one predictor. Each
//! simple regression also yields per-cell weights; flagged cells are
//! replaced by a calibrated value before they enter the partial responses
//! of the other coordinates. This is what makes the estimator resistant to
//! outliers confined to individual cells rather than whole rows.
//!
//! Starting values come from an lqq MM-regression on predictors clamped to
//! median ± 2·MAD.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{mm_fit_with, FastSOptions};
use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::mscale::starting_scale;
use crate::rho::{tune_for_bdp, tune_for_efficiency, CellWeight, RhoKind, RhoSpec};
use crate::stats::{mad, mad_about, median, median_in_place};
use crate::univariate::simple_s_fit;

/// Imputed cell value used when |β̂_j| falls below ε₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallSlopeImputation {
    #[default]
    ColumnMedian,
    Zero,
}

#[derive(Debug, Clone)]
pub struct ShootingConfig {
    pub rho: RhoSpec,
    /// Maps |residual|/σ̂_j to a cell weight; hard rejection at c = 3 by default.
    pub cell_weight: CellWeight,
    /// M-step tolerance.
    pub eps1: f64,
    /// I-step tolerance, multiplied by MAD(y).
    pub eps2_factor: f64,
    /// Small-slope threshold, multiplied by MAD(y)/MAD(x_j).
    pub eps3_factor: f64,
    /// Outer-loop tolerance on Σ|Δσ̂_j|, multiplied by MAD(y).
    pub eps4_factor: f64,
    pub max_outer_loops: usize,
    pub small_slope_imputation: SmallSlopeImputation,
    /// Fast-S settings (including the seed) of the lqq MM initializer.
    pub init: FastSOptions,
}

impl ShootingConfig {
    pub fn new(rho: RhoSpec) -> Self {
        ShootingConfig {
            rho,
            cell_weight: CellWeight::default(),
            eps1: 1e-6,
            eps2_factor: 1e-6,
            eps3_factor: 1e-4,
            eps4_factor: 1e-2,
            max_outer_loops: 50,
            small_slope_imputation: SmallSlopeImputation::ColumnMedian,
            init: FastSOptions::default(),
        }
    }

    /// ρ of family `kind` tuned to breakdown point `bdp` in the simple regressions.
    pub fn for_bdp(kind: RhoKind, bdp: f64) -> Result<Self> {
        Ok(Self::new(tune_for_bdp(kind, bdp)?))
    }

    /// Biweight with k = 3.420.
    pub fn biweight() -> Self {
        Self::new(RhoSpec::biweight(3.420).expect("valid constant"))
    }

    /// Skipped Huber with k = 2.177.
    pub fn skipped_huber() -> Self {
        Self::new(RhoSpec::skipped_huber(2.177).expect("valid constant"))
    }

    pub fn with_cutoff(mut self, c: f64) -> Self {
        self.cell_weight = CellWeight::HardRejection { cutoff: c };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let tolerances = [self.eps1, self.eps2_factor, self.eps3_factor, self.eps4_factor];
        if tolerances.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument("shooting tolerances must be positive".into()));
        }
        if let CellWeight::HardRejection { cutoff } = self.cell_weight {
            if !(cutoff > 0.0) {
                return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff}")));
            }
        }
        if self.max_outer_loops == 0 {
            return Err(Error::InvalidArgument("max_outer_loops must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self::biweight()
    }
}

/// Starting values shared by every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialFit {
    pub slopes: Vec<f64>,
    pub intercept: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingFit {
    pub slopes: Vec<f64>,
    pub intercept: f64,
    /// σ̂_j of the last simple regression of each coordinate.
    pub scales: Vec<f64>,
    /// Intercepts α̂_j of the last simple regressions.
    pub coordinate_intercepts: Vec<f64>,
    /// n×p cell weights w_ij.
    pub weights: DMatrix<f64>,
    /// n×p cleaned design x̃_ij.
    pub cleaned_x: DMatrix<f64>,
    pub outer_loops: usize,
    pub converged: bool,
    pub init: InitialFit,
    /// Σ_j |σ̂_j^(L) - σ̂_j^(L-1)| after each outer loop.
    pub scale_change_trace: Vec<f64>,
}

/// Cell and row outlier flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlierFlags {
    /// `cells[i][j]` is true when cell (i, j) is flagged.
    pub cells: Vec<Vec<bool>>,
    /// True when every cell of the row is flagged.
    pub rows: Vec<bool>,
}

/// Clamps every column to [median - 2·MAD, median + 2·MAD] (normalized MAD).
pub fn huberize_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    if x.nrows() == 0 {
        return out;
    }
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let center = median_in_place(&mut col.clone());
        let spread = mad_about(&col, center);
        let (lo, hi) = (center - 2.0 * spread, center + 2.0 * spread);
        for v in out.column_mut(j).iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
    out
}

fn lqq_initializer() -> Result<&'static (RhoSpec, RhoSpec)> {
    static SPECS: OnceLock<(RhoSpec, RhoSpec)> = OnceLock::new();
    if let Some(s) = SPECS.get() {
        return Ok(s);
    }
    let specs = (tune_for_bdp(RhoKind::Lqq, 0.5)?, tune_for_efficiency(RhoKind::Lqq, 0.95)?);
    Ok(SPECS.get_or_init(|| specs))
}

/// lqq MM-regression (50% breakdown, 95% efficiency) of `y` on the
/// Huberized design `data.x`.
pub fn initial_fit(huberized: &RegressionData, opts: &FastSOptions) -> Result<InitialFit> {
    let constant: Vec<String> = (0..huberized.p())
        .filter(|&j| {
            let col = huberized.x.column(j);
            col.iter().all(|v| *v == col[0])
        })
        .map(|j| huberized.names[j].clone())
        .collect();
    if !constant.is_empty() {
        return Err(Error::Initialization {
            columns: constant,
            reason: "column is constant after Huberization (more than half of its values coincide)".into(),
        });
    }
    let (s_rho, m_rho) = lqq_initializer()?;
    let fit = mm_fit_with(huberized, s_rho, m_rho, opts).map_err(|e| match e {
        Error::DegenerateDesign(reason) | Error::Estimation(reason) => Error::Initialization {
            columns: crate::linalg::deficient_columns(&huberized.x, &huberized.names),
            reason,
        },
        other => other,
    })?;
    Ok(InitialFit { slopes: fit.slopes, intercept: fit.intercept, scale: fit.scale })
}

/// Gauss-Seidel partial response for coordinate `j`: current-loop terms for
/// k < j, previous-loop terms for k > j.
pub fn partial_response(
    y: &[f64],
    cleaned_prev: &DMatrix<f64>,
    cleaned_curr: &DMatrix<f64>,
    slopes_prev: &[f64],
    slopes_curr: &[f64],
    j: usize,
) -> Vec<f64> {
    let mut out = y.to_vec();
    for k in 0..slopes_curr.len() {
        let (col, beta) = match k.cmp(&j) {
            std::cmp::Ordering::Less => (cleaned_curr.column(k), slopes_curr[k]),
            std::cmp::Ordering::Greater => (cleaned_prev.column(k), slopes_prev[k]),
            std::cmp::Ordering::Equal => continue,
        };
        if beta == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(col.iter()) {
            *o -= x * beta;
        }
    }
    out
}

/// Calibrated cell values (ỹᵢ - α̂_j)/β̂_j, or median(x_j) everywhere when
/// |β̂_j| < `eps3`.
pub fn impute_cells(ytilde: &[f64], alpha: f64, beta: f64, x_j: &[f64], eps3: f64) -> Vec<f64> {
    impute_cells_with(ytilde, alpha, beta, x_j, eps3, SmallSlopeImputation::ColumnMedian)
}

pub fn impute_cells_with(
    ytilde: &[f64],
    alpha: f64,
    beta: f64,
    x_j: &[f64],
    eps3: f64,
    fallback: SmallSlopeImputation,
) -> Vec<f64> {
    if beta.abs() >= eps3 {
        return ytilde.iter().map(|y| (y - alpha) / beta).collect();
    }
    let fill = match fallback {
        SmallSlopeImputation::ColumnMedian => median_in_place(&mut x_j.to_vec()),
        SmallSlopeImputation::Zero => 0.0,
    };
    vec![fill; ytilde.len()]
}

/// Cell weights w(|resᵢ|/s_j). A zero scale (exact fit) flags nothing.
pub fn update_cell_weights(residuals: &[f64], s_j: f64, weight: &CellWeight) -> Vec<f64> {
    if !(s_j > 0.0) {
        return vec![1.0; residuals.len()];
    }
    residuals.iter().map(|r| weight.weight(r.abs() / s_j)).collect()
}

/// x̃ᵢ = wᵢ xᵢ + (1 - wᵢ) x̂ᵢ.
pub fn clean_column(x_j: &[f64], xhat_j: &[f64], w_j: &[f64]) -> Vec<f64> {
    x_j.iter()
        .zip(xhat_j)
        .zip(w_j)
        .map(|((x, xh), w)| w * x + (1.0 - w) * xh)
        .collect()
}

/// Tolerances that scale with the data.
struct Tolerances {
    eps2: f64,
    eps3: Vec<f64>,
    eps4: f64,
}

fn tolerances(data: &RegressionData, config: &ShootingConfig) -> Result<Tolerances> {
    let mad_y = mad(data.y.as_slice())?;
    if !(mad_y > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    let eps3 = (0..data.p())
        .map(|j| {
            let col = data.column(j);
            let mut spread = mad(&col)?;
            if spread == 0.0 {
                let center = median(&col)?;
                let dev: Vec<f64> = col.iter().map(|v| v - center).collect();
                spread = starting_scale(&dev)?;
            }
            Ok(if spread > 0.0 { config.eps3_factor * mad_y / spread } else { f64::INFINITY })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tolerances { eps2: config.eps2_factor * mad_y, eps3, eps4: config.eps4_factor * mad_y })
}

fn check_input(data: &RegressionData) -> Result<()> {
    data.validate()?;
    if data.n() <= 2 || data.p() == 0 {
        return Err(Error::InvalidArgument(format!(
            "shooting S needs n > 2 and p >= 1, got n = {} and p = {}",
            data.n(),
            data.p()
        )));
    }
    Ok(())
}

/// Full shooting S-estimate: Huberized lqq-MM start, then coordinate
/// descent until Σ|Δσ̂_j| < ε₄ or `max_outer_loops`.
pub fn shooting_fit(data: &RegressionData, config: &ShootingConfig) -> Result<ShootingFit> {
    check_input(data)?;
    config.validate()?;
    let huberized = data.with_x(huberize_columns(&data.x));
    let init = initial_fit(&huberized, &config.init)?;
    shooting_fit_from_init(data, config, &init)
}

/// Coordinate-descent loop from given starting values. The initializer
/// depends only on the data and the fast-S options, so callers fitting
/// several ρ-functions to one dataset can share it.
pub fn shooting_fit_from_init(data: &RegressionData, config: &ShootingConfig, init: &InitialFit) -> Result<ShootingFit> {
    check_input(data)?;
    config.validate()?;
    let (n, p) = (data.n(), data.p());
    if init.slopes.len() != p {
        return Err(Error::InvalidArgument("initial slopes do not match the design".into()));
    }
    let tol = tolerances(data, config)?;
    let y = data.y.as_slice();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| data.column(j)).collect();

    let mut cleaned_prev = huberize_columns(&data.x);
    let mut cleaned_curr = cleaned_prev.clone();
    let mut slopes_prev = init.slopes.clone();
    let mut slopes_curr = slopes_prev.clone();
    let mut scales_prev = vec![init.scale; p];
    let mut scales_curr = scales_prev.clone();
    let mut intercepts = vec![init.intercept; p];
    let mut weights = DMatrix::from_element(n, p, 1.0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut loops = 0;

    while loops < config.max_outer_loops {
        loops += 1;
        for j in 0..p {
            let ytilde = partial_response(y, &cleaned_prev, &cleaned_curr, &slopes_prev, &slopes_curr, j);
            let fit = simple_s_fit(&ytilde, &columns[j], &config.rho, slopes_prev[j], scales_prev[j], config.eps1, tol.eps2)
                .map_err(|e| match e {
                    Error::DegenerateDesign(m) => Error::Estimation(format!("column '{}': {m}", data.names[j])),
                    other => other,
                })?;
            slopes_curr[j] = fit.slope;
            intercepts[j] = fit.intercept;
            scales_curr[j] = fit.scale;
            let xhat = impute_cells_with(&ytilde, fit.intercept, fit.slope, &columns[j], tol.eps3[j], config.small_slope_imputation);
            let w = update_cell_weights(&fit.residuals, fit.scale, &config.cell_weight);
            let cleaned = clean_column(&columns[j], &xhat, &w);
            weights.column_mut(j).copy_from_slice(&w);
            cleaned_curr.column_mut(j).copy_from_slice(&cleaned);
        }
        let change: f64 = scales_curr.iter().zip(&scales_prev).map(|(a, b)| (a - b).abs()).sum();
        trace.push(change);
        cleaned_prev.copy_from(&cleaned_curr);
        slopes_prev.copy_from_slice(&slopes_curr);
        scales_prev.copy_from_slice(&scales_curr);
        if change < tol.eps4 {
            converged = true;
            break;
        }
    }

    let mut full_res: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..p).map(|j| cleaned_curr[(i, j)] * slopes_curr[j]).sum::<f64>())
        .collect();
    let intercept = median_in_place(&mut full_res);

    Ok(ShootingFit {
        slopes: slopes_curr,
        intercept,
        scales: scales_curr,
        coordinate_intercepts: intercepts,
        weights,
        cleaned_x: cleaned_curr,
        outer_loops: loops,
        converged,
        init: init.clone(),
        scale_change_trace: trace,
    })
}

/// Flags cells with weight below `threshold`, and rows whose cells are all flagged.
pub fn flag_outliers(fit: &ShootingFit, threshold: f64) -> OutlierFlags {
    let (n, p) = fit.weights.shape();
    let cells: Vec<Vec<bool>> = (0..n).map(|i| (0..p).map(|j| fit.weights[(i, j)] < threshold).collect()).collect();
    let rows = cells.iter().map(|r| !r.is_empty() && r.iter().all(|f| *f)).collect();
    OutlierFlags { cells, rows }
}
