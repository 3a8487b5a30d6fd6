//! Seeded Monte-Carlo harness: synthetic designs, cellwise / rowwise /
//! vertical contamination, replicate experiments and the n·MSE and AND
//! metrics.
//!
//! Every generator is a pure function of its inputs and a `u64` seed.
//! Replicates draw their seeds from [`derive_seed`], so a replicate's data
//! do not depend on how many replicates run or on which thread runs them.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ls_fit, mm_fit_with, s_fit, FastSOptions};
use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::rho::{tune_for_bdp, tune_for_efficiency, RhoKind, RhoSpec};
use crate::shooting::{huberize_columns, initial_fit, shooting_fit_from_init, ShootingConfig};
use crate::stats::{compensated_sum, mad};

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the stream identified by `path` under `base`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, p| mix(acc ^ mix(*p)))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Round half away from zero of `eps * count`.
pub fn contaminated_count(eps: f64, count: usize) -> usize {
    (eps * count as f64).round() as usize
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("contamination fraction {eps} outside [0, 1)")));
    }
    Ok(())
}

/// Simulation design: x ~ N(0, Σ), y = xβ + e with e ~ N(0, σ²).
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub correlated: bool,
    pub beta_true: Vec<f64>,
    pub sigma_err: f64,
    pub cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl SimDesign {
    /// β_j = j/p; Σ = I (σ = 0.5) or Σ_ij = 0.5^|i-j| (σ = 0.81).
    pub fn new(n: usize, p: usize, correlated: bool) -> Result<Self> {
        let sigma = if correlated { 0.81 } else { 0.5 };
        Self::with_sigma(n, p, correlated, sigma)
    }

    pub fn with_sigma(n: usize, p: usize, correlated: bool, sigma_err: f64) -> Result<Self> {
        if p == 0 || n == 0 || !(sigma_err >= 0.0) {
            return Err(Error::InvalidArgument("design needs n, p >= 1 and sigma >= 0".into()));
        }
        let cov = DMatrix::from_fn(p, p, |i, j| {
            if correlated {
                0.5_f64.powi((i as i32 - j as i32).abs())
            } else if i == j {
                1.0
            } else {
                0.0
            }
        });
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("design covariance not positive definite".into()))?
            .l();
        let beta_true = (1..=p).map(|j| j as f64 / p as f64).collect();
        Ok(SimDesign { n, p, correlated, beta_true, sigma_err, cov, chol })
    }

    /// n = 100, p = 15, uncorrelated predictors.
    pub fn uncorrelated() -> Self {
        Self::new(100, 15, false).expect("valid design")
    }

    /// n = 100, p = 15, Σ_ij = 0.5^|i-j|.
    pub fn correlated() -> Self {
        Self::new(100, 15, true).expect("valid design")
    }

    /// √(β'Σβ)/σ.
    pub fn signal_to_noise(&self) -> f64 {
        let b = DVector::from_column_slice(&self.beta_true);
        (b.dot(&(&self.cov * &b))).sqrt() / self.sigma_err
    }

    /// Lower Cholesky factor of Σ.
    pub fn cov_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    fn draw_row(&self, rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> DVector<f64> {
        let z = DVector::from_fn(self.p, |_, _| StandardNormal.sample(rng));
        (&self.chol * z).map(|v: f64| mean + sd * v)
    }
}

/// Clean dataset from `design`.
pub fn gen_clean(design: &SimDesign, seed: u64) -> RegressionData {
    let mut r = rng(seed);
    let mut x = DMatrix::zeros(design.n, design.p);
    for i in 0..design.n {
        let row = design.draw_row(&mut r, 0.0, 1.0);
        x.row_mut(i).copy_from(&row.transpose());
    }
    let beta = DVector::from_column_slice(&design.beta_true);
    let signal = &x * beta;
    let y = DVector::from_fn(design.n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut r);
        signal[i] + design.sigma_err * e
    });
    RegressionData::new(x, y).expect("generated data are finite")
}

/// Outlier distribution shared by the cellwise and rowwise settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierScheme {
    /// N(50, 1)
    Dense,
    /// N(0, 100²)
    Scattered,
    /// N(50, 10²)
    Wide,
}

impl OutlierScheme {
    pub const ALL: [OutlierScheme; 3] = [OutlierScheme::Dense, OutlierScheme::Scattered, OutlierScheme::Wide];

    pub fn mean(self) -> f64 {
        match self {
            OutlierScheme::Dense | OutlierScheme::Wide => 50.0,
            OutlierScheme::Scattered => 0.0,
        }
    }

    pub fn sd(self) -> f64 {
        match self {
            OutlierScheme::Dense => 1.0,
            OutlierScheme::Scattered => 100.0,
            OutlierScheme::Wide => 10.0,
        }
    }
}

impl fmt::Display for OutlierScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutlierScheme::Dense => "dense",
            OutlierScheme::Scattered => "scattered",
            OutlierScheme::Wide => "wide",
        })
    }
}

/// Contamination mode and fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ContaminationScheme {
    Cellwise { eps: f64, scheme: OutlierScheme },
    Rowwise { eps: f64, scheme: OutlierScheme },
    /// Errors of the chosen rows drawn from N(50, σ²).
    Vertical { eps: f64 },
}

impl ContaminationScheme {
    pub fn eps(&self) -> f64 {
        match *self {
            ContaminationScheme::Cellwise { eps, .. }
            | ContaminationScheme::Rowwise { eps, .. }
            | ContaminationScheme::Vertical { eps } => eps,
        }
    }

    pub fn apply(&self, design: &SimDesign, data: &RegressionData, seed: u64) -> Result<RegressionData> {
        match *self {
            ContaminationScheme::Cellwise { eps, scheme } => contaminate_cellwise(data, eps, scheme, seed),
            ContaminationScheme::Rowwise { eps, scheme } => contaminate_rowwise(data, eps, scheme, design.cov_factor(), seed),
            ContaminationScheme::Vertical { eps } => contaminate_vertical(design, data, eps, seed),
        }
    }
}

/// Replaces round(eps·n·p) cells, chosen uniformly without replacement, by
/// draws from `scheme`. The response is untouched.
pub fn contaminate_cellwise(data: &RegressionData, eps: f64, scheme: OutlierScheme, seed: u64) -> Result<RegressionData> {
    check_eps(eps)?;
    let (n, p) = (data.n(), data.p());
    let count = contaminated_count(eps, n * p);
    let mut r = rng(seed);
    let dist = Normal::new(scheme.mean(), scheme.sd()).expect("positive sd");
    let mut x = data.x.clone();
    for cell in index::sample(&mut r, n * p, count).into_iter() {
        // row-major cell numbering
        x[(cell / p, cell % p)] = dist.sample(&mut r);
    }
    Ok(data.with_x(x))
}

/// Replaces round(eps·n) rows by draws from N(mean·1, sd²·Σ), with Σ given
/// through its lower Cholesky factor.
pub fn contaminate_rowwise(
    data: &RegressionData,
    eps: f64,
    scheme: OutlierScheme,
    cov_factor: &DMatrix<f64>,
    seed: u64,
) -> Result<RegressionData> {
    check_eps(eps)?;
    let p = data.p();
    if cov_factor.shape() != (p, p) {
        return Err(Error::InvalidArgument("covariance factor does not match the design".into()));
    }
    let count = contaminated_count(eps, data.n());
    let mut r = rng(seed);
    let mut x = data.x.clone();
    let mut rows = index::sample(&mut r, data.n(), count).into_vec();
    rows.sort_unstable();
    for i in rows {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut r));
        let row = (cov_factor * z).map(|v: f64| scheme.mean() + scheme.sd() * v);
        x.row_mut(i).copy_from(&row.transpose());
    }
    Ok(data.with_x(x))
}

/// Rebuilds yᵢ = xᵢ'β + e with e ~ N(50, σ²) for round(eps·n) random rows.
pub fn contaminate_vertical(design: &SimDesign, data: &RegressionData, eps: f64, seed: u64) -> Result<RegressionData> {
    check_eps(eps)?;
    if design.p != data.p() {
        return Err(Error::InvalidArgument("design does not match the data".into()));
    }
    let count = contaminated_count(eps, data.n());
    let mut r = rng(seed);
    let mut rows = index::sample(&mut r, data.n(), count).into_vec();
    rows.sort_unstable();
    let mut y = data.y.clone();
    for i in rows {
        let signal: f64 = (0..design.p).map(|j| data.x[(i, j)] * design.beta_true[j]).sum();
        let e: f64 = StandardNormal.sample(&mut r);
        y[i] = signal + 50.0 + design.sigma_err * e;
    }
    Ok(data.with_y(y))
}

/// n · (1/p) Σ_j (1/R) Σ_r (β̂_j^(r) - β_j)².
pub fn n_mse(estimates: &[Vec<f64>], beta_true: &[f64], n: usize) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("n_mse of an empty estimate list".into()));
    }
    let p = beta_true.len();
    if estimates.iter().any(|e| e.len() != p) {
        return Err(Error::InvalidArgument("estimate length differs from the true coefficient vector".into()));
    }
    let r = estimates.len() as f64;
    let sq = estimates.iter().flat_map(|e| e.iter().zip(beta_true).map(|(b, t)| (b - t) * (b - t)));
    Ok(n as f64 * compensated_sum(sq) / (p as f64 * r))
}

/// Average norm distance of replicate estimates from the full-data
/// estimate, with each coefficient scaled by MAD(x_j)/MAD(y).
pub fn and_metric(estimates: &[Vec<f64>], beta_full: &[f64], x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("AND of an empty estimate list".into()));
    }
    let p = beta_full.len();
    if x.ncols() != p || estimates.iter().any(|e| e.len() != p) {
        return Err(Error::InvalidArgument("estimate length differs from the design".into()));
    }
    let mad_y = mad(y)?;
    if !(mad_y > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    let ratio = (0..p)
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let m = mad(&col)?;
            if !(m > 0.0) {
                return Err(Error::InvalidArgument(format!("column {} has zero MAD", j + 1)));
            }
            Ok((m / mad_y).powi(2))
        })
        .collect::<Result<Vec<_>>>()?;
    let norms = estimates.iter().map(|e| {
        let s = compensated_sum((0..p).map(|j| (e[j] - beta_full[j]).powi(2) * ratio[j]));
        (s / p as f64).sqrt()
    });
    Ok(compensated_sum(norms) / estimates.len() as f64)
}

/// The five compared estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "ls")]
    Ls,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "mm")]
    Mm,
    #[serde(rename = "shooting-bi")]
    ShootingBi,
    #[serde(rename = "shooting-skh")]
    ShootingSkh,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Estimator::Ls, Estimator::S, Estimator::Mm, Estimator::ShootingBi, Estimator::ShootingSkh];

    pub fn id(self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::S => "s",
            Estimator::Mm => "mm",
            Estimator::ShootingBi => "shooting-bi",
            Estimator::ShootingSkh => "shooting-skh",
        }
    }

    pub fn is_shooting(self) -> bool {
        matches!(self, Estimator::ShootingBi | Estimator::ShootingSkh)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

/// Tuned ρ-functions of the five estimators: S with biweight k = 3.420,
/// MM with biweight at 50% breakdown / 95% efficiency, shooting S with
/// biweight k = 3.420 or skipped Huber k = 2.177.
#[derive(Debug, Clone)]
pub struct EstimatorSuite {
    pub s_rho: RhoSpec,
    pub mm_s_rho: RhoSpec,
    pub mm_m_rho: RhoSpec,
    pub shooting_bi: ShootingConfig,
    pub shooting_skh: ShootingConfig,
    /// Fast-S settings; the seed is replaced per fit.
    pub fast_s: FastSOptions,
}

impl EstimatorSuite {
    pub fn standard() -> Result<Self> {
        Ok(EstimatorSuite {
            s_rho: RhoSpec::biweight(3.420)?,
            mm_s_rho: tune_for_bdp(RhoKind::Biweight, 0.5)?,
            mm_m_rho: tune_for_efficiency(RhoKind::Biweight, 0.95)?,
            shooting_bi: ShootingConfig::biweight(),
            shooting_skh: ShootingConfig::skipped_huber(),
            fast_s: FastSOptions::default(),
        })
    }

    pub fn with_subsamples(mut self, n_subsamples: usize) -> Self {
        self.fast_s.n_subsamples = n_subsamples;
        self
    }

    /// Slopes of every requested estimator on `data`. The two shooting
    /// variants share one initializer.
    pub fn fit_all(&self, data: &RegressionData, estimators: &[Estimator], seed: u64) -> Vec<Result<Vec<f64>>> {
        let opts = FastSOptions { seed, ..self.fast_s.clone() };
        let mut init = None;
        estimators
            .iter()
            .map(|est| match est {
                Estimator::Ls => ls_fit(data).map(|f| f.slopes),
                Estimator::S => s_fit(data, &self.s_rho, &opts).map(|f| f.slopes),
                Estimator::Mm => mm_fit_with(data, &self.mm_s_rho, &self.mm_m_rho, &opts).map(|f| f.slopes),
                Estimator::ShootingBi | Estimator::ShootingSkh => {
                    let config = if *est == Estimator::ShootingBi { &self.shooting_bi } else { &self.shooting_skh };
                    let start = init.get_or_insert_with(|| initial_fit(&data.with_x(huberize_columns(&data.x)), &opts));
                    match start {
                        Ok(start) => shooting_fit_from_init(data, config, start).map(|f| f.slopes),
                        Err(e) => Err(Error::Estimation(e.to_string())),
                    }
                }
            })
            .collect()
    }
}

/// Which simulation table to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    CellUncorr,
    CellCorr,
    RowCorr,
    VerticalCorr,
}

impl TableId {
    pub fn design(self) -> SimDesign {
        match self {
            TableId::CellUncorr => SimDesign::uncorrelated(),
            _ => SimDesign::correlated(),
        }
    }

    fn contamination(self, eps: f64, scheme: OutlierScheme) -> ContaminationScheme {
        match self {
            TableId::CellUncorr | TableId::CellCorr => ContaminationScheme::Cellwise { eps, scheme },
            TableId::RowCorr => ContaminationScheme::Rowwise { eps, scheme },
            TableId::VerticalCorr => ContaminationScheme::Vertical { eps },
        }
    }

    fn uses_schemes(self) -> bool {
        !matches!(self, TableId::VerticalCorr)
    }
}

/// One aggregated cell of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Contamination scheme (simulations) or data block (real data).
    pub block: String,
    pub estimator: Estimator,
    /// Column label, e.g. `eps=0.05` or `observed`.
    pub setting: String,
    pub eps: f64,
    /// n·MSE or AND over the successful replicates; `None` if all failed.
    pub value: Option<f64>,
    pub replicates_ok: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NMse,
    And,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metric: Metric,
    /// Human-readable description of the design and scheme.
    pub description: String,
    pub replicates: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn value(&self, block: &str, estimator: Estimator, setting: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.block == block && r.estimator == estimator && r.setting == setting)
            .and_then(|r| r.value)
    }

    /// Wide table: one line per (block, estimator), one column per setting.
    pub fn to_table_csv(&self) -> String {
        let mut settings: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, Estimator)> = Vec::new();
        for r in &self.rows {
            if !settings.contains(&r.setting.as_str()) {
                settings.push(&r.setting);
            }
            if !keys.contains(&(r.block.as_str(), r.estimator)) {
                keys.push((&r.block, r.estimator));
            }
        }
        let mut out = String::from("block,estimator");
        for s in &settings {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (block, est) in keys {
            out.push_str(&format!("{block},{est}"));
            for s in &settings {
                match self.value(block, est, s) {
                    Some(v) => out.push_str(&format!(",{v:.6}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long (tidy) CSV, one line per report row.
    pub fn to_tidy_csv(&self) -> String {
        let mut out = String::from("block,estimator,setting,eps,value,replicates_ok,failures\n");
        for r in &self.rows {
            let v = r.value.map_or("NA".to_string(), |v| format!("{v}"));
            out.push_str(&format!("{},{},{},{},{},{},{}\n", r.block, r.estimator, r.setting, r.eps, v, r.replicates_ok, r.failures));
        }
        out
    }
}

fn eps_label(eps: f64) -> String {
    format!("eps={eps}")
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Estimation(format!("cannot build thread pool: {e}")))
}

/// A simulation-table request.
#[derive(Debug, Clone)]
pub struct TableRequest {
    pub table: TableId,
    /// Outlier distributions to run; ignored for vertical outliers.
    pub schemes: Vec<OutlierScheme>,
    pub estimators: Vec<Estimator>,
    pub eps_grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    pub suite: EstimatorSuite,
}

impl TableRequest {
    pub fn new(table: TableId, eps_grid: Vec<f64>, replicates: usize, seed: u64) -> Result<Self> {
        Ok(TableRequest {
            table,
            schemes: OutlierScheme::ALL.to_vec(),
            estimators: Estimator::ALL.to_vec(),
            eps_grid,
            replicates,
            seed,
            threads: 1,
            suite: EstimatorSuite::standard()?,
        })
    }
}

const STREAM_DATA: u64 = 1;
const STREAM_CONTAMINATION: u64 = 2;
const STREAM_FIT: u64 = 3;

/// Runs R replicates per (scheme, ε) and aggregates n·MSE per estimator.
/// Clean data are shared across ε and schemes within a replicate.
pub fn run_table(req: &TableRequest) -> Result<ExperimentReport> {
    if req.replicates == 0 || req.estimators.is_empty() || req.eps_grid.is_empty() {
        return Err(Error::InvalidArgument("need at least one replicate, estimator and eps".into()));
    }
    for &eps in &req.eps_grid {
        check_eps(eps)?;
    }
    let design = req.table.design();
    let blocks: Vec<Option<OutlierScheme>> = if req.table.uses_schemes() {
        if req.schemes.is_empty() {
            return Err(Error::InvalidArgument("no outlier scheme selected".into()));
        }
        req.schemes.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };

    // replicate -> block -> eps -> estimator -> slopes
    type Replicate = Vec<Vec<Vec<Result<Vec<f64>>>>>;
    let run_replicate = |r: usize| -> Replicate {
        let r = r as u64;
        let clean = gen_clean(&design, derive_seed(req.seed, &[STREAM_DATA, r]));
        let fit_seed = derive_seed(req.seed, &[STREAM_FIT, r]);
        let clean_fits = req.eps_grid.contains(&0.0).then(|| req.suite.fit_all(&clean, &req.estimators, fit_seed));
        blocks
            .iter()
            .enumerate()
            .map(|(b, scheme)| {
                req.eps_grid
                    .iter()
                    .enumerate()
                    .map(|(e, &eps)| {
                        if eps == 0.0 {
                            let fits = clean_fits.as_ref().expect("computed when eps grid contains 0");
                            return fits.iter().map(|f| f.as_ref().map(Clone::clone).map_err(|e| Error::Estimation(e.to_string()))).collect();
                        }
                        let scheme = req.table.contamination(eps, scheme.unwrap_or(OutlierScheme::Dense));
                        let seed = derive_seed(req.seed, &[STREAM_CONTAMINATION, r, b as u64, e as u64]);
                        match scheme.apply(&design, &clean, seed) {
                            Ok(data) => req.suite.fit_all(&data, &req.estimators, fit_seed),
                            Err(err) => req.estimators.iter().map(|_| Err(Error::Estimation(err.to_string()))).collect(),
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let replicates: Vec<Replicate> = thread_pool(req.threads)?.install(|| (0..req.replicates).into_par_iter().map(run_replicate).collect());

    let mut rows = Vec::new();
    for (b, scheme) in blocks.iter().enumerate() {
        let block = scheme.map_or("vertical".to_string(), |s| s.to_string());
        for (k, &est) in req.estimators.iter().enumerate() {
            for (e, &eps) in req.eps_grid.iter().enumerate() {
                let ok: Vec<Vec<f64>> = replicates.iter().filter_map(|rep| rep[b][e][k].as_ref().ok().cloned()).collect();
                let failures = req.replicates - ok.len();
                let value = if ok.is_empty() { None } else { Some(n_mse(&ok, &design.beta_true, design.n)?) };
                rows.push(ReportRow { block: block.clone(), estimator: est, setting: eps_label(eps), eps, value, replicates_ok: ok.len(), failures });
            }
        }
    }
    Ok(ExperimentReport {
        metric: Metric::NMse,
        description: format!(
            "{:?}: n={}, p={}, {} predictors, sigma={}",
            req.table,
            design.n,
            design.p,
            if design.correlated { "correlated" } else { "uncorrelated" },
            design.sigma_err
        ),
        replicates: req.replicates,
        seed: req.seed,
        rows,
    })
}

/// Options for the real-data benchmarks.
#[derive(Debug, Clone)]
pub struct RealDataRequest {
    pub estimators: Vec<Estimator>,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    pub suite: EstimatorSuite,
}

impl RealDataRequest {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        Ok(RealDataRequest { estimators: Estimator::ALL.to_vec(), replicates, seed, threads: 1, suite: EstimatorSuite::standard()? })
    }
}

/// Fits on the full data with the fixed fit seed, then aggregates AND
/// from the per-replicate fits.
fn and_report<F>(data: &RegressionData, req: &RealDataRequest, block: &str, setting: &str, eps: f64, make_replicate: F) -> Result<Vec<ReportRow>>
where
    F: Fn(u64) -> Result<RegressionData> + Sync,
{
    if req.replicates == 0 || req.estimators.is_empty() {
        return Err(Error::InvalidArgument("need at least one replicate and estimator".into()));
    }
    let fit_seed = derive_seed(req.seed, &[STREAM_FIT]);
    let full = req.suite.fit_all(data, &req.estimators, fit_seed);
    let per_rep: Vec<Vec<Result<Vec<f64>>>> = thread_pool(req.threads)?.install(|| {
        (0..req.replicates)
            .into_par_iter()
            .map(|r| match make_replicate(r as u64) {
                Ok(d) => req.suite.fit_all(&d, &req.estimators, fit_seed),
                Err(e) => req.estimators.iter().map(|_| Err(Error::Estimation(e.to_string()))).collect(),
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (k, &est) in req.estimators.iter().enumerate() {
        let ok: Vec<Vec<f64>> = per_rep.iter().filter_map(|rep| rep[k].as_ref().ok().cloned()).collect();
        let value = match (&full[k], ok.is_empty()) {
            (Ok(beta_full), false) => Some(and_metric(&ok, beta_full, &data.x, data.y.as_slice())?),
            _ => None,
        };
        rows.push(ReportRow {
            block: block.to_string(),
            estimator: est,
            setting: setting.to_string(),
            eps,
            value,
            replicates_ok: ok.len(),
            failures: req.replicates - ok.len(),
        });
    }
    Ok(rows)
}

/// AND of fits on R random subsets of round(frac·n) rows (kept in their
/// original order) against the full-data fit.
pub fn real_data_resample(data: &RegressionData, frac: f64, req: &RealDataRequest) -> Result<ExperimentReport> {
    data.validate()?;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidArgument(format!("subset fraction {frac} outside (0, 1]")));
    }
    let m = contaminated_count(frac, data.n());
    if m <= data.p() + 1 {
        return Err(Error::InvalidArgument(format!("subsets of {m} rows are too small for p = {}", data.p())));
    }
    let rows = and_report(data, req, "observed", "observed", 0.0, |r| {
        let mut g = rng(derive_seed(req.seed, &[STREAM_DATA, r]));
        let mut idx = index::sample(&mut g, data.n(), m).into_vec();
        idx.sort_unstable();
        Ok(data.select_rows(&idx))
    })?;
    Ok(ExperimentReport {
        metric: Metric::And,
        description: format!("resample {m} of {} rows, p={}", data.n(), data.p()),
        replicates: req.replicates,
        seed: req.seed,
        rows,
    })
}

/// Replaces round(eps·n·p) random cells by N(med_j + shift·MAD_j, MAD_j²)
/// (column median and normalized MAD of the original design).
pub fn contaminate_real(data: &RegressionData, eps: f64, shift: f64, seed: u64) -> Result<RegressionData> {
    check_eps(eps)?;
    let (n, p) = (data.n(), data.p());
    let params = (0..p)
        .map(|j| {
            let col = data.column(j);
            Ok((crate::stats::median(&col)?, mad(&col)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut g = rng(seed);
    let mut x = data.x.clone();
    for cell in index::sample(&mut g, n * p, contaminated_count(eps, n * p)).into_iter() {
        let (i, j) = (cell / p, cell % p);
        let (center, spread) = params[j];
        let z: f64 = StandardNormal.sample(&mut g);
        x[(i, j)] = center + shift * spread + spread * z;
    }
    Ok(data.with_x(x))
}

/// AND of fits on R cell-contaminated copies against the fit on the
/// original data.
pub fn real_data_contaminate(data: &RegressionData, eps: f64, shift: f64, req: &RealDataRequest) -> Result<ExperimentReport> {
    data.validate()?;
    check_eps(eps)?;
    let rows = and_report(data, req, "contaminated", "contaminated", eps, |r| {
        contaminate_real(data, eps, shift, derive_seed(req.seed, &[STREAM_CONTAMINATION, r]))
    })?;
    Ok(ExperimentReport {
        metric: Metric::And,
        description: format!("{}% of cells replaced by N(median + {shift}*MAD, MAD^2), n={}, p={}", eps * 100.0, data.n(), data.p()),
        replicates: req.replicates,
        seed: req.seed,
        rows,
    })
}
