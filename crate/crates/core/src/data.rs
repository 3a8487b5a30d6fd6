use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Response vector and n×p design matrix (no intercept column) with names.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub response: String,
}

impl RegressionData {
    /// Builds a dataset with default column names `x1..xp` and response `y`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names, "y".to_string())
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>, response: String) -> Result<Self> {
        let data = RegressionData { y, x, names, response };
        data.validate()?;
        Ok(data)
    }

    /// Row-major convenience constructor.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("ragged design rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::InvalidArgument(format!(
                "design has {} rows but response has {}",
                self.x.nrows(),
                self.y.len()
            )));
        }
        if self.names.len() != self.x.ncols() {
            return Err(Error::InvalidArgument("one name per design column required".into()));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite response at row {i}")));
        }
        for j in 0..self.x.ncols() {
            if let Some(i) = self.x.column(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value in column '{}' at row {i}",
                    self.names[j]
                )));
            }
        }
        Ok(())
    }

    /// Same names, replaced design.
    pub fn with_x(&self, x: DMatrix<f64>) -> Self {
        RegressionData { x, ..self.clone() }
    }

    /// Same names, replaced response.
    pub fn with_y(&self, y: DVector<f64>) -> Self {
        RegressionData { y, ..self.clone() }
    }

    /// Rows selected by `idx`, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        RegressionData { y, x, names: self.names.clone(), response: self.response.clone() }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }
}
