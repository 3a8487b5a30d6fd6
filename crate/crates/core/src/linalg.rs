//! Least-squares solves with an intercept, via column-equilibrated QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// `[1 | x]`.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

/// Solves min Σ wᵢ (yᵢ - aᵢ·β)² over the rows with positive weight, where
/// `design` already carries the intercept column. `None` weights mean OLS.
/// Rank deficiency reports the offending coefficient indices.
pub(crate) fn weighted_lstsq(design: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> std::result::Result<DVector<f64>, Vec<usize>> {
    let m = design.ncols();
    let rows: Vec<usize> = match w {
        Some(w) => (0..design.nrows()).filter(|&i| w[i] > 0.0).collect(),
        None => (0..design.nrows()).collect(),
    };
    if rows.len() < m {
        return Err((0..m).collect());
    }
    let root_w = |i: usize| w.map_or(1.0, |w| w[i].sqrt());
    let mut a = DMatrix::from_fn(rows.len(), m, |r, j| root_w(rows[r]) * design[(rows[r], j)]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| root_w(i) * y[i]));

    let mut col_scale = vec![1.0; m];
    for (j, scale) in col_scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            *scale = norm;
            a.column_mut(j).unscale_mut(norm);
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let deficient: Vec<usize> = (0..m).filter(|&j| !(r[(j, j)].abs() > RANK_TOL)).collect();
    if !deficient.is_empty() {
        return Err(deficient);
    }
    let qtb = qr.q().transpose() * b;
    let mut coef = r.solve_upper_triangular(&qtb).ok_or_else(|| (0..m).collect::<Vec<_>>())?;
    for (j, scale) in col_scale.iter().enumerate() {
        coef[j] /= scale;
    }
    Ok(coef)
}

/// Like [`weighted_lstsq`] but maps rank deficiency to a named error.
pub(crate) fn lstsq_named(design: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>, names: &[String]) -> Result<DVector<f64>> {
    weighted_lstsq(design, y, w).map_err(|cols| {
        let named: Vec<String> = cols
            .iter()
            .map(|&j| if j == 0 { "(intercept)".to_string() } else { names[j - 1].clone() })
            .collect();
        Error::DegenerateDesign(format!("rank-deficient design in [{}]", named.join(", ")))
    })
}

/// Names of design columns (intercept excluded) that make `[1 | x]` rank
/// deficient.
pub(crate) fn deficient_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let design = with_intercept(x);
    let y = vec![0.0; x.nrows()];
    match weighted_lstsq(&design, &y, None) {
        Ok(_) => Vec::new(),
        Err(cols) => cols
            .into_iter()
            .map(|j| if j == 0 { "(intercept)".to_string() } else { names[j - 1].clone() })
            .collect(),
    }
}

/// y - A·coef.
pub(crate) fn residuals(design: &DMatrix<f64>, y: &[f64], coef: &DVector<f64>) -> Vec<f64> {
    let fitted = design * coef;
    y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi).collect()
}
