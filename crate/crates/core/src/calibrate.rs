//! Post-processing of raw quantile predictions: zero-censoring of the lowest
//! level followed by an ascending non-crossing pass.

use serde::{Deserialize, Serialize};

use crate::scoring::QuantilePredictions;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationLog {
    pub n_censored: usize,
    pub n_crossings_fixed: usize,
}

impl CalibrationLog {
    pub fn merge(&mut self, other: CalibrationLog) {
        self.n_censored += other.n_censored;
        self.n_crossings_fixed += other.n_crossings_fixed;
    }
}

/// Replaces negative values at the lowest level with zero.
pub fn censor_lowest(mut preds: QuantilePredictions) -> (QuantilePredictions, usize) {
    let mut n = 0;
    for row in preds.rows_mut() {
        if row[0] < 0.0 {
            row[0] = 0.0;
            n += 1;
        }
    }
    (preds, n)
}

/// Raises every value below its lower-level neighbour to that neighbour.
pub fn fix_crossing(mut preds: QuantilePredictions) -> (QuantilePredictions, usize) {
    let mut n = 0;
    for row in preds.rows_mut() {
        for j in 1..row.len() {
            if row[j] < row[j - 1] {
                row[j] = row[j - 1];
                n += 1;
            }
        }
    }
    preds.set_calibrated();
    (preds, n)
}

/// Censoring then crossing repair.
pub fn calibrate(preds: QuantilePredictions) -> (QuantilePredictions, CalibrationLog) {
    let (p, n_censored) = censor_lowest(preds);
    let (p, n_crossings_fixed) = fix_crossing(p);
    (
        p,
        CalibrationLog {
            n_censored,
            n_crossings_fixed,
        },
    )
}
