use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::harness::{derive_seed, BoostSettings};
use super::BenchError;
use crate::boost::{BoostEnsemble, GrowthMode};
use crate::data::{Dataset, PREDICTOR_NAMES};
use crate::scoring::LevelGrid;

/// Total split gain and rank of every predictor at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub levels: Vec<f64>,
    pub predictors: Vec<String>,
    /// `gains[level][predictor]`.
    pub gains: Vec<Vec<f64>>,
    /// `ranks[level][predictor]`, 1 = largest gain.
    pub ranks: Vec<Vec<usize>>,
}

/// Ranks from total gains: descending gain, ties to the lower predictor index.
pub fn rank_gains(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; gains.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r + 1;
    }
    ranks
}

/// Importance table from one fitted ensemble per level.
pub fn feature_importance(ensembles: &[BoostEnsemble]) -> Result<ImportanceReport, BenchError> {
    let Some(first) = ensembles.first() else {
        return Err(BenchError::Config("no ensembles given".into()));
    };
    let p = first.total_gain().len();
    let predictors = if p == PREDICTOR_NAMES.len() {
        PREDICTOR_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=p).map(|j| format!("x{j}")).collect()
    };
    let mut report = ImportanceReport {
        levels: Vec::new(),
        predictors,
        gains: Vec::new(),
        ranks: Vec::new(),
    };
    for e in ensembles {
        let alpha = e.config().alpha;
        let g = e.total_gain();
        if g.len() != p {
            return Err(BenchError::Config("ensembles disagree on predictor count".into()));
        }
        if g.iter().all(|&v| v == 0.0) {
            return Err(BenchError::NoSplits(alpha));
        }
        report.levels.push(alpha);
        report.ranks.push(rank_gains(g));
        report.gains.push(g.to_vec());
    }
    Ok(report)
}

/// Fits one leaf-wise ensemble per level on the whole dataset and ranks the
/// predictors by total gain.
pub fn fit_importance(
    dataset: &Dataset,
    grid: &LevelGrid,
    settings: &BoostSettings,
    seed: u64,
) -> Result<ImportanceReport, BenchError> {
    let (x, y) = (dataset.features(), dataset.targets());
    let ensembles: Vec<BoostEnsemble> = grid
        .levels()
        .par_iter()
        .enumerate()
        .map(|(j, &a)| {
            let cfg = settings.resolve(GrowthMode::Leafwise, a, derive_seed(&[seed, u64::MAX, j as u64]));
            BoostEnsemble::fit(&x, &y, &cfg).map_err(BenchError::from)
        })
        .collect::<Result<_, _>>()?;
    feature_importance(&ensembles)
}

impl ImportanceReport {
    /// Long format: one row per (level, predictor).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["level", "predictor", "total_gain", "rank"]).expect("in-memory csv write");
        for (i, a) in self.levels.iter().enumerate() {
            for (j, name) in self.predictors.iter().enumerate() {
                w.write_record([
                    a.to_string(),
                    name.clone(),
                    self.gains[i][j].to_string(),
                    self.ranks[i][j].to_string(),
                ])
                .expect("in-memory csv write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}
