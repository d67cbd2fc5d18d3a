//! Probabilistic precipitation merging with quantile regression.
//!
//! Gauge totals and two gridded satellite products are merged into
//! 17-predictor regression samples ([`geo`]), several quantile learners are
//! trained on them ([`linear`], [`forest`], [`boost`], [`net`]), raw quantiles
//! are post-processed ([`calibrate`]) and scored with quantile scoring
//! functions and the quantile scoring rule ([`scoring`]). The [`bench`] module
//! runs the k-fold comparison and the [`cli`] module drives it from the
//! command line.

pub mod bench;
pub mod boost;
pub mod calibrate;
pub mod cli;
pub mod container;
pub mod data;
pub mod forest;
pub mod geo;
pub mod linear;
pub mod net;
pub mod optim;
pub mod scoring;

use thiserror::Error;

pub use data::{Dataset, Matrix, Sample, YearMonth, N_PREDICTORS, PREDICTOR_NAMES};
pub use scoring::{LevelGrid, QuantilePredictions};

/// Errors shared by all learners.
#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("empty training data")]
    Empty,
    #[error("non-finite feature or target")]
    NonFinite,
    #[error("quantile level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("{rows} feature rows but {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("feature length mismatch: expected {expected}, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub(crate) fn check_fit_inputs(x: &Matrix, y: &[f64], alpha: f64) -> Result<(), FitError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::InvalidLevel(alpha));
    }
    check_xy(x, y)
}

pub(crate) fn check_xy(x: &Matrix, y: &[f64]) -> Result<(), FitError> {
    if x.rows() != y.len() {
        return Err(FitError::ShapeMismatch {
            rows: x.rows(),
            targets: y.len(),
        });
    }
    if y.is_empty() {
        return Err(FitError::Empty);
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

/// Empirical `alpha`-quantile, a minimizer of the summed pinball loss.
///
/// Uses the inverse of the empirical distribution function, averaging the two
/// neighbouring order statistics where `alpha * n` is an integer (the point
/// where the minimizer is an interval).
pub fn empirical_quantile(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, alpha)
}

pub(crate) fn sorted_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let h = alpha * n as f64;
    let k = h.round();
    if (h - k).abs() < 1e-9 && k >= 1.0 && (k as usize) < n {
        let k = k as usize;
        0.5 * (sorted[k - 1] + sorted[k])
    } else {
        let idx = (h.ceil() as usize).clamp(1, n) - 1;
        sorted[idx]
    }
}
