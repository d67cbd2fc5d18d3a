use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{
    default_learners, BenchmarkConfig, BoostSettings, FoldGranularity, LearnerEntry,
    DEFAULT_BENCHMARK,
};
use crate::scoring::LevelGrid;

pub const CONFIG_VERSION: u32 = 1;

/// A synthetic dataset drawn in place of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub scenario: String,
    pub n: usize,
}

/// Run configuration file. Every key except `version` is optional; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub levels: LevelGrid,
    pub folds: usize,
    pub fold_granularity: FoldGranularity,
    pub seed: u64,
    pub benchmark: String,
    pub learners: Vec<LearnerEntry>,
    pub importance: Option<BoostSettings>,
    pub dataset: Option<PathBuf>,
    pub synth: Option<SynthSource>,
    pub out: Option<PathBuf>,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            levels: LevelGrid::default(),
            folds: 5,
            fold_granularity: FoldGranularity::BySample,
            seed: 0,
            benchmark: DEFAULT_BENCHMARK.to_string(),
            learners: default_learners(),
            importance: Some(BoostSettings::default()),
            dataset: None,
            synth: None,
            out: None,
            plots: false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match value.get("version") {
            Some(v) if v.as_u64() == Some(CONFIG_VERSION as u64) => {}
            Some(v) => return Err(format!("unsupported config version {v}")),
            None => return Err("config is missing \"version\"".into()),
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn benchmark_config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            levels: self.levels.clone(),
            folds: self.folds,
            fold_granularity: self.fold_granularity,
            seed: self.seed,
            benchmark: self.benchmark.clone(),
            learners: self.learners.clone(),
            importance: self.importance,
        }
    }
}
