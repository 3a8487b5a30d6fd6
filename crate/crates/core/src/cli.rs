//! Command-line front end. [`run_from`] is the testable entry point; the
//! binary only forwards process arguments and standard streams.
//!
//! Exit codes: 0 on success, 2 for bad input (arguments, CSV, infeasible
//! calibration targets), 3 when estimation fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{ls_fit, mm_fit, s_fit, FastSOptions};
use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::rho::{tune_for_bdp, tune_for_efficiency, RhoKind, RhoSpec};
use crate::shooting::{flag_outliers, shooting_fit, ShootingConfig};
use crate::simbench::{
    real_data_contaminate, real_data_resample, run_table, Estimator, ExperimentReport, OutlierScheme, RealDataRequest,
    TableId, TableRequest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

/// Environment variable capping replicate-level parallelism.
pub const THREADS_ENV: &str = "CELLSHOT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cellshot", version, about = "Shooting S-estimator for regression with cellwise outliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a regression and write a JSON report.
    Fit(FitArgs),
    /// List flagged cells and rows as CSV.
    Diagnose(DiagnoseArgs),
    /// Run a Monte-Carlo table.
    Simulate(SimulateArgs),
    /// Resampling and contamination benchmarks on a dataset.
    BenchReal(BenchRealArgs),
    /// Tune a ρ-function for a breakdown point or an efficiency.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ShootingBi,
    ShootingSkh,
    Ls,
    S,
    Mm,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column; every other column is a predictor.
    #[arg(long)]
    response: String,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "shooting-bi")]
    method: Method,
    /// Breakdown point (simple regressions for shooting, S stage for s/mm).
    #[arg(long)]
    bdp: Option<f64>,
    /// Hard-rejection cutoff for the cell weights.
    #[arg(long, default_value_t = 3.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Weight below which a cell is flagged.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableArg {
    CellUncorr,
    CellCorr,
    RowCorr,
    Vertical,
}

impl From<TableArg> for TableId {
    fn from(t: TableArg) -> Self {
        match t {
            TableArg::CellUncorr => TableId::CellUncorr,
            TableArg::CellCorr => TableId::CellCorr,
            TableArg::RowCorr => TableId::RowCorr,
            TableArg::Vertical => TableId::VerticalCorr,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Dense,
    Scattered,
    Wide,
}

impl From<SchemeArg> for OutlierScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dense => OutlierScheme::Dense,
            SchemeArg::Scattered => OutlierScheme::Scattered,
            SchemeArg::Wide => OutlierScheme::Wide,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    table: TableArg,
    /// Contamination fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.05,0.1")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Estimator ids, comma separated (default: all five).
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Outlier distributions (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    scheme: Option<Vec<SchemeArg>>,
    /// Elemental subsamples per fast-S fit.
    #[arg(long, default_value_t = 500)]
    subsamples: usize,
    /// Output stem; writes <stem>.csv, <stem>.tidy.csv and <stem>.json.
    #[arg(long, default_value = "simulation")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    Resample,
    Contaminate,
    Both,
}

#[derive(Debug, Args)]
struct BenchRealArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "both")]
    mode: BenchMode,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Fraction of rows per resample.
    #[arg(long, default_value_t = 0.8)]
    frac: f64,
    /// Fraction of contaminated cells.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Outlier shift in column MADs.
    #[arg(long, default_value_t = 10.0)]
    shift: f64,
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long, default_value_t = 500)]
    subsamples: usize,
    /// Output stem; writes <stem>.csv and <stem>.json.
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RhoArg {
    Biweight,
    SkippedHuber,
    Lqq,
}

impl From<RhoArg> for RhoKind {
    fn from(r: RhoArg) -> Self {
        match r {
            RhoArg::Biweight => RhoKind::Biweight,
            RhoArg::SkippedHuber => RhoKind::SkippedHuber,
            RhoArg::Lqq => RhoKind::Lqq,
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "target")]
struct CalibrateTarget {
    #[arg(long)]
    bdp: Option<f64>,
    #[arg(long)]
    efficiency: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    rho: RhoArg,
    #[command(flatten)]
    target: CalibrateTarget,
}

/// One coefficient of a [`FitReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub slope: f64,
    /// Scale of the last simple regression (shooting methods only).
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    /// 1-based data row.
    pub row: usize,
    pub column: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub outer_loops: Option<usize>,
    pub scale_change_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub rho: Option<RhoSpec>,
    pub cutoff: Option<f64>,
    pub bdp: Option<f64>,
    pub threshold: f64,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub response: String,
}

/// JSON report written by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub coefficients: Vec<Coefficient>,
    pub intercept: f64,
    /// Residual scale of the whole fit (LS, S, MM) or of the initializer.
    pub scale: f64,
    /// Cells with weight below the threshold (shooting methods).
    pub flagged_cells: Vec<FlaggedCell>,
    /// 1-based rows flagged as a whole: every cell flagged (shooting) or a
    /// row robustness weight below the threshold (S, MM).
    pub flagged_rows: Vec<usize>,
    pub convergence: Convergence,
    pub config: ConfigEcho,
}

/// Reads a comma-separated file with a header row. Blank or `NA` cells
/// are rejected with the offending row and column in the message.
pub fn read_csv(path: &Path, response: &str) -> Result<RegressionData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let resp = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Ingestion(format!("response column '{response}' not found in header")))?;
    if header.len() < 2 {
        return Err(Error::Ingestion("need the response and at least one predictor column".into()));
    }
    let mut y = Vec::new();
    let mut cells = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Ingestion(format!("line {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Ingestion(format!("line {line}: expected {} fields, found {}", header.len(), record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let col = &header[j];
            if field.is_empty() || field.eq_ignore_ascii_case("na") {
                return Err(Error::Ingestion(format!("missing value at line {line}, column '{col}'")));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Ingestion(format!("non-numeric value '{field}' at line {line}, column '{col}'")))?;
            if !v.is_finite() {
                return Err(Error::Ingestion(format!("non-finite value at line {line}, column '{col}'")));
            }
            if j == resp {
                y.push(v);
            } else {
                cells.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Ingestion(format!("{}: no data rows", path.display())));
    }
    let p = header.len() - 1;
    let names: Vec<String> = header.iter().enumerate().filter(|(j, _)| *j != resp).map(|(_, h)| h.clone()).collect();
    let x = DMatrix::from_row_slice(y.len(), p, &cells);
    RegressionData::with_names(x, DVector::from_vec(y), names, response.to_string())
}

fn shooting_config(method: Method, est: &EstimatorArgs) -> Result<ShootingConfig> {
    let kind = if method == Method::ShootingBi { RhoKind::Biweight } else { RhoKind::SkippedHuber };
    let base = match (est.bdp, kind) {
        (Some(bdp), _) => ShootingConfig::for_bdp(kind, bdp)?,
        (None, RhoKind::Biweight) => ShootingConfig::biweight(),
        (None, _) => ShootingConfig::skipped_huber(),
    };
    Ok(base.with_cutoff(est.cutoff).with_seed(est.seed))
}

/// Fits `data` with the chosen estimator and assembles the report.
fn fit_report(data: &RegressionData, est: &EstimatorArgs, threshold: f64) -> Result<FitReport> {
    let method = est.method;
    let opts = FastSOptions::with_seed(est.seed);
    let mut echo = ConfigEcho {
        rho: None,
        cutoff: None,
        bdp: est.bdp,
        threshold,
        seed: est.seed,
        n: data.n(),
        p: data.p(),
        response: data.response.clone(),
    };
    let coefficients = |slopes: &[f64], scales: Option<&[f64]>| -> Vec<Coefficient> {
        slopes
            .iter()
            .enumerate()
            .map(|(j, s)| Coefficient { name: data.names[j].clone(), slope: *s, scale: scales.map(|v| v[j]) })
            .collect()
    };
    let row_flags = |fit_res: Vec<f64>, spec: &RhoSpec, scale: f64| -> Vec<usize> {
        if !(scale > 0.0) {
            return Vec::new();
        }
        fit_res.iter().enumerate().filter(|(_, r)| spec.weight(*r / scale) < threshold).map(|(i, _)| i + 1).collect()
    };

    match method {
        Method::ShootingBi | Method::ShootingSkh => {
            let config = shooting_config(method, est)?;
            let fit = shooting_fit(data, &config)?;
            let flags = flag_outliers(&fit, threshold);
            let mut flagged_cells = Vec::new();
            for (i, row) in flags.cells.iter().enumerate() {
                for (j, flagged) in row.iter().enumerate() {
                    if *flagged {
                        flagged_cells.push(FlaggedCell { row: i + 1, column: data.names[j].clone(), weight: fit.weights[(i, j)] });
                    }
                }
            }
            echo.rho = Some(config.rho.clone());
            echo.cutoff = Some(est.cutoff);
            Ok(FitReport {
                method,
                coefficients: coefficients(&fit.slopes, Some(&fit.scales)),
                intercept: fit.intercept,
                scale: fit.init.scale,
                flagged_cells,
                flagged_rows: flags.rows.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i + 1).collect(),
                convergence: Convergence {
                    converged: fit.converged,
                    outer_loops: Some(fit.outer_loops),
                    scale_change_trace: fit.scale_change_trace.clone(),
                },
                config: echo,
            })
        }
        Method::Ls | Method::S | Method::Mm => {
            let (fit, weight_rho) = match method {
                Method::Ls => (ls_fit(data)?, None),
                Method::S => {
                    let spec = match est.bdp {
                        Some(bdp) => tune_for_bdp(RhoKind::Biweight, bdp)?,
                        None => RhoSpec::biweight(3.420)?,
                    };
                    (s_fit(data, &spec, &opts)?, Some(spec))
                }
                _ => {
                    let m_rho = tune_for_efficiency(RhoKind::Biweight, 0.95)?;
                    (mm_fit(data, RhoKind::Biweight, est.bdp.unwrap_or(0.5), 0.95, &opts)?, Some(m_rho))
                }
            };
            let flagged_rows = match &weight_rho {
                Some(spec) => row_flags(fit.residuals(data), spec, fit.scale),
                None => Vec::new(),
            };
            echo.rho = weight_rho;
            Ok(FitReport {
                method,
                coefficients: coefficients(&fit.slopes, None),
                intercept: fit.intercept,
                scale: fit.scale,
                flagged_cells: Vec::new(),
                flagged_rows,
                convergence: Convergence { converged: true, outer_loops: None, scale_change_trace: Vec::new() },
                config: echo,
            })
        }
    }
}

fn write_output(out: Option<&Path>, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Estimation(format!("cannot serialize report: {e}")))
}

fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_csv(&args.data.data, &args.data.response)?;
    let report = fit_report(&data, &args.est, args.threshold)?;
    write_output(args.out.as_deref(), &to_json(&report)?, stdout)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Flag listing: `row,column,weight` lines, a blank line, then a summary.
pub fn diagnose_csv(report: &FitReport) -> String {
    let mut out = String::from("row,column,weight\n");
    for c in &report.flagged_cells {
        out.push_str(&format!("{},{},{}\n", c.row, csv_field(&c.column), c.weight));
    }
    out.push('\n');
    out.push_str("flagged_cells,flagged_rows,whole_rows\n");
    let rows: Vec<String> = report.flagged_rows.iter().map(|r| r.to_string()).collect();
    out.push_str(&format!("{},{},{}\n", report.flagged_cells.len(), report.flagged_rows.len(), rows.join(" ")));
    out
}

fn cmd_diagnose(args: &DiagnoseArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_csv(&args.data.data, &args.data.response)?;
    let report = fit_report(&data, &args.est, args.threshold)?;
    write_output(args.out.as_deref(), &diagnose_csv(&report), stdout)
}

fn threads() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|t| *t > 0).unwrap_or(1)
}

fn parse_estimators(ids: &Option<Vec<String>>) -> Result<Vec<Estimator>> {
    match ids {
        None => Ok(Estimator::ALL.to_vec()),
        Some(ids) => ids.iter().map(|s| s.trim().parse()).collect(),
    }
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

fn write_report(stem: &Path, report: &ExperimentReport, table_csv: String, stdout: &mut dyn Write) -> Result<()> {
    let csv_path = with_extension(stem, "csv");
    fs::write(&csv_path, &table_csv)?;
    fs::write(with_extension(stem, "tidy.csv"), report.to_tidy_csv())?;
    fs::write(with_extension(stem, "json"), to_json(report)?)?;
    stdout.write_all(table_csv.as_bytes())?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut req = TableRequest::new(args.table.into(), args.eps.clone(), args.replicates, args.seed)?;
    req.estimators = parse_estimators(&args.estimators)?;
    if let Some(schemes) = &args.scheme {
        req.schemes = schemes.iter().map(|s| (*s).into()).collect();
    }
    req.suite = req.suite.with_subsamples(args.subsamples);
    req.threads = threads();
    let report = run_table(&req)?;
    write_report(&args.out, &report, report.to_table_csv(), stdout)
}

fn cmd_bench_real(args: &BenchRealArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_csv(&args.data.data, &args.data.response)?;
    let mut req = RealDataRequest::new(args.replicates, args.seed)?;
    req.estimators = parse_estimators(&args.estimators)?;
    req.suite = req.suite.with_subsamples(args.subsamples);
    req.threads = threads();
    let mut rows = Vec::new();
    let mut description = Vec::new();
    if matches!(args.mode, BenchMode::Resample | BenchMode::Both) {
        let r = real_data_resample(&data, args.frac, &req)?;
        description.push(r.description);
        rows.extend(r.rows);
    }
    if matches!(args.mode, BenchMode::Contaminate | BenchMode::Both) {
        let r = real_data_contaminate(&data, args.eps, args.shift, &req)?;
        description.push(r.description);
        rows.extend(r.rows);
    }
    let report = ExperimentReport {
        metric: crate::simbench::Metric::And,
        description: description.join("; "),
        replicates: args.replicates,
        seed: args.seed,
        rows,
    };
    // estimators as rows, observed / contaminated blocks as columns
    let mut table = String::from("estimator");
    let blocks: Vec<&str> = ["observed", "contaminated"].into_iter().filter(|b| report.rows.iter().any(|r| r.block == *b)).collect();
    for b in &blocks {
        table.push(',');
        table.push_str(b);
    }
    table.push('\n');
    for est in &req.estimators {
        table.push_str(est.id());
        for b in &blocks {
            match report.value(b, *est, b) {
                Some(v) => table.push_str(&format!(",{v:.6}")),
                None => table.push_str(",NA"),
            }
        }
        table.push('\n');
    }
    let csv_path = with_extension(&args.out, "csv");
    fs::write(&csv_path, &table)?;
    fs::write(with_extension(&args.out, "json"), to_json(&report)?)?;
    stdout.write_all(table.as_bytes())?;
    Ok(())
}

/// Output of `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rho: RhoKind,
    pub constants: Vec<f64>,
    pub delta: f64,
    pub breakdown_point: f64,
    pub efficiency: f64,
}

fn cmd_calibrate(args: &CalibrateArgs, stdout: &mut dyn Write) -> Result<()> {
    let kind: RhoKind = args.rho.into();
    let spec = match (args.target.bdp, args.target.efficiency) {
        (Some(bdp), _) => tune_for_bdp(kind, bdp)?,
        (None, Some(eff)) => tune_for_efficiency(kind, eff)?,
        (None, None) => unreachable!("clap enforces one target"),
    };
    let out = Calibration {
        rho: kind,
        constants: spec.constants().to_vec(),
        delta: spec.delta(),
        breakdown_point: spec.breakdown_point(),
        efficiency: spec.efficiency(),
    };
    write_output(None, &to_json(&out)?, stdout)
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, stdout),
        Command::Diagnose(a) => cmd_diagnose(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::BenchReal(a) => cmd_bench_real(a, stdout),
        Command::Calibrate(a) => cmd_calibrate(a, stdout),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_ESTIMATION
            }
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_from(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
