//! K-fold benchmarking of the quantile learners, gain-based predictor
//! importance, and synthetic scenarios with known conditional quantiles.

mod folds;
mod harness;
mod importance;
mod report;
mod synth;

use thiserror::Error;

pub use folds::{kfold_split, FoldGranularity, FoldPlan};
pub use harness::{
    default_learners, derive_seed, run_benchmark, BenchmarkConfig, BoostSettings,
    EvaluationReport, LearnerCalibration, LearnerEntry, LearnerFailure, LearnerSpec, TaskTiming,
    DEFAULT_BENCHMARK,
};
pub use importance::{feature_importance, fit_importance, rank_gains, ImportanceReport};
pub use report::{read_report, write_report, REPORT_FILES};
pub use synth::{generate_synthetic, normal_quantile, ScenarioKind, SyntheticScenario};

use crate::scoring::ScoringError;
use crate::FitError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("benchmark learner {0:?} is not configured")]
    MissingBenchmark(String),
    #[error("no splits recorded at level {0}")]
    NoSplits(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
