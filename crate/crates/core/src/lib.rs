//! Robust linear regression under cellwise contamination.
//!
//! The centerpiece is the shooting S-estimator ([`shooting::shooting_fit`]):
//! coordinate descent in which every coordinate update is a simple
//! S-regression, so that an outlying cell only downweights that cell instead
//! of its whole row. Alongside it the crate provides:
//!
//! - [`rho`]: biweight, skipped Huber and lqq ρ-functions and their calibration
//! - [`mscale`]: the M-scale fixed-point solver
//! - [`univariate`]: simple S-regression by IRLS
//! - [`baselines`]: least squares, fast-S and MM regression
//! - [`simbench`]: seeded simulation designs, contamination schemes and the
//!   n·MSE / AND benchmark metrics
//! - [`cli`]: the `cellshot` command-line surface (CSV in, JSON/CSV out)
//!
//! ```
//! use cellshot::{RegressionData, ShootingConfig, shooting_fit, flag_outliers};
//!
//! let rows: Vec<Vec<f64>> = (0..40)
//!     .map(|i| {
//!         let t = i as f64;
//!         vec![(t * 0.37).sin(), (t * 0.91).cos(), (t * 1.73).sin(), (t * 2.39).cos()]
//!     })
//!     .collect();
//! let y: Vec<f64> = rows.iter().enumerate()
//!     .map(|(i, r)| 1.0 + r[0] + 2.0 * r[1] - r[2] + 0.5 * r[3] + 0.05 * (i as f64 * 1.3).sin())
//!     .collect();
//! let mut data = RegressionData::from_rows(&rows, &y)?;
//! data.x[(4, 1)] = 40.0; // one bad cell
//!
//! let fit = shooting_fit(&data, &ShootingConfig::biweight())?;
//! let flags = flag_outliers(&fit, 0.5);
//! assert!(flags.cells[4][1]);
//! assert!((fit.slopes[1] - 2.0).abs() < 0.2);
//! # Ok::<(), cellshot::Error>(())
//! ```

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub(crate) mod linalg;
pub mod mscale;
pub(crate) mod quadrature;
pub mod rho;
pub mod shooting;
pub mod simbench;
pub mod stats;
pub mod univariate;

pub use baselines::{ls_fit, mm_fit, mm_fit_with, s_fit, FastSOptions, FitMethod, LinearFit};
pub use data::RegressionData;
pub use error::{Error, Result};
pub use mscale::{initial_scale, solve_mscale, ScaleSolution};
pub use rho::{
    expected_rho_normal, hard_rejection_weight, irls_weight, rho_eval, rho_prime, tune_for_bdp,
    tune_for_efficiency, CellWeight, RhoKind, RhoSpec,
};
pub use shooting::{flag_outliers, shooting_fit, OutlierFlags, ShootingConfig, ShootingFit};
pub use univariate::{simple_s_fit, weighted_ls_simple, SimpleSFit};
