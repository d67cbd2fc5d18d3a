use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{kfold_split, FoldGranularity};
use super::importance::{fit_importance, ImportanceReport};
use super::synth::ScenarioKind;
use super::BenchError;
use crate::boost::{BoostConfig, BoostEnsemble, GrowthMode};
use crate::calibrate::{calibrate, CalibrationLog};
use crate::data::{Dataset, Matrix};
use crate::forest::{ForestConfig, QuantileForest};
use crate::geo::SkipRecord;
use crate::linear::{LinearQuantileModel, SolverConfig};
use crate::net::{QrnnConfig, QrnnModel};
use crate::scoring::{LevelGrid, QuantilePredictions, ScoreTable};

/// SplitMix64 finalizer folded over the parts; used to give every task its
/// own seed independent of scheduling.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Boosting hyperparameters; unset fields take the defaults of the chosen
/// growth mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_leaves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_data_in_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bagging_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_split_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bins: Option<usize>,
}

impl BoostSettings {
    pub fn resolve(&self, mode: GrowthMode, alpha: f64, seed: u64) -> BoostConfig {
        let d = match mode {
            GrowthMode::Leafwise => BoostConfig::leafwise(alpha),
            GrowthMode::Levelwise => BoostConfig::levelwise(alpha),
        };
        BoostConfig {
            n_iterations: self.n_iterations.unwrap_or(d.n_iterations),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            max_leaves: self.max_leaves.unwrap_or(d.max_leaves),
            min_data_in_leaf: self.min_data_in_leaf.unwrap_or(d.min_data_in_leaf),
            feature_fraction: self.feature_fraction.unwrap_or(d.feature_fraction),
            bagging_fraction: self.bagging_fraction.unwrap_or(d.bagging_fraction),
            min_split_gain: self.min_split_gain.unwrap_or(d.min_split_gain),
            max_bins: self.max_bins.unwrap_or(d.max_bins),
            seed,
            ..d
        }
    }
}

/// A learner and its hyperparameters. Seeds inside the configs are mixed
/// with the run seed, fold and level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    LinearQr {
        #[serde(default)]
        solver: SolverConfig,
    },
    Qrf {
        #[serde(default)]
        forest: ForestConfig,
    },
    LevelwiseBoost {
        #[serde(default)]
        boost: BoostSettings,
    },
    LeafwiseBoost {
        #[serde(default)]
        boost: BoostSettings,
    },
    Qrnn {
        #[serde(default)]
        net: QrnnConfig,
    },
    /// The true conditional quantiles of a synthetic scenario; fits nothing.
    Oracle { scenario: ScenarioKind },
}

impl LearnerSpec {
    /// Whether one model serves all levels.
    pub fn is_multi_level(&self) -> bool {
        matches!(self, LearnerSpec::Qrf { .. } | LearnerSpec::Oracle { .. })
    }

    /// Predictions at a single level from a per-level learner.
    pub fn fit_predict_level(
        &self,
        train_x: &Matrix,
        train_y: &[f64],
        test_x: &Matrix,
        alpha: f64,
        seed: u64,
    ) -> Result<Vec<f64>, BenchError> {
        Ok(match self {
            LearnerSpec::LinearQr { solver } => {
                LinearQuantileModel::fit(train_x, train_y, alpha, solver)?.predict_matrix(test_x)?
            }
            LearnerSpec::LevelwiseBoost { boost } => {
                let cfg = boost.resolve(GrowthMode::Levelwise, alpha, seed);
                BoostEnsemble::fit(train_x, train_y, &cfg)?.predict_matrix(test_x)?
            }
            LearnerSpec::LeafwiseBoost { boost } => {
                let cfg = boost.resolve(GrowthMode::Leafwise, alpha, seed);
                BoostEnsemble::fit(train_x, train_y, &cfg)?.predict_matrix(test_x)?
            }
            LearnerSpec::Qrnn { net } => {
                let cfg = QrnnConfig { seed, ..*net };
                QrnnModel::fit(train_x, train_y, alpha, &cfg)?.predict_matrix(test_x)?
            }
            LearnerSpec::Qrf { .. } | LearnerSpec::Oracle { .. } => {
                let grid = LevelGrid::new(vec![alpha])?;
                self.fit_predict_all(train_x, train_y, test_x, &grid, seed)?.column(0)
            }
        })
    }

    /// Raw (uncalibrated) predictions at every level of `grid`.
    pub fn fit_predict_all(
        &self,
        train_x: &Matrix,
        train_y: &[f64],
        test_x: &Matrix,
        grid: &LevelGrid,
        seed: u64,
    ) -> Result<QuantilePredictions, BenchError> {
        match self {
            LearnerSpec::Qrf { forest } => {
                let cfg = ForestConfig {
                    seed: derive_seed(&[forest.seed, seed]),
                    ..*forest
                };
                let f = QuantileForest::fit(train_x, train_y, &cfg)?;
                Ok(QuantilePredictions::new(f.predict_matrix(test_x, grid)?, grid.clone())?)
            }
            LearnerSpec::Oracle { scenario } => Ok(scenario.predict(test_x, grid)),
            _ => {
                let n = test_x.rows();
                let mut values = vec![0.0; n * grid.len()];
                for (j, &a) in grid.levels().iter().enumerate() {
                    let col = self.fit_predict_level(train_x, train_y, test_x, a, derive_seed(&[seed, j as u64]))?;
                    for i in 0..n {
                        values[i * grid.len() + j] = col[i];
                    }
                }
                Ok(QuantilePredictions::new(values, grid.clone())?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerEntry {
    pub name: String,
    pub model: LearnerSpec,
}

impl LearnerEntry {
    pub fn new(name: &str, model: LearnerSpec) -> Self {
        LearnerEntry {
            name: name.to_string(),
            model,
        }
    }
}

/// The five learners with their default hyperparameters; `linear_qr` is the
/// benchmark.
pub fn default_learners() -> Vec<LearnerEntry> {
    vec![
        LearnerEntry::new("linear_qr", LearnerSpec::LinearQr { solver: SolverConfig::default() }),
        LearnerEntry::new("qrf", LearnerSpec::Qrf { forest: ForestConfig::default() }),
        LearnerEntry::new("boost_levelwise", LearnerSpec::LevelwiseBoost { boost: BoostSettings::default() }),
        LearnerEntry::new("boost_leafwise", LearnerSpec::LeafwiseBoost { boost: BoostSettings::default() }),
        LearnerEntry::new("qrnn", LearnerSpec::Qrnn { net: QrnnConfig::default() }),
    ]
}

pub const DEFAULT_BENCHMARK: &str = "linear_qr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub levels: LevelGrid,
    pub folds: usize,
    pub fold_granularity: FoldGranularity,
    pub seed: u64,
    pub benchmark: String,
    pub learners: Vec<LearnerEntry>,
    /// Leaf-wise settings for the whole-dataset importance fits; `None`
    /// skips them.
    pub importance: Option<BoostSettings>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            levels: LevelGrid::default(),
            folds: 5,
            fold_granularity: FoldGranularity::BySample,
            seed: 0,
            benchmark: DEFAULT_BENCHMARK.to_string(),
            learners: default_learners(),
            importance: Some(BoostSettings::default()),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !self.learners.iter().any(|l| l.name == self.benchmark) {
            return Err(BenchError::MissingBenchmark(self.benchmark.clone()));
        }
        for (i, l) in self.learners.iter().enumerate() {
            if l.name.is_empty() || self.learners[..i].iter().any(|o| o.name == l.name) {
                return Err(BenchError::Config(format!("duplicate or empty learner name {:?}", l.name)));
            }
        }
        if self.folds < 2 {
            return Err(BenchError::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }
}

/// Wall-clock time of one fit-and-predict task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub learner: String,
    pub fold: usize,
    /// `None` for learners serving all levels from one fit.
    pub level: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerFailure {
    pub learner: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerCalibration {
    pub learner: String,
    pub log: CalibrationLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: BenchmarkConfig,
    pub n_samples: usize,
    pub fold_sizes: Vec<usize>,
    pub scores: ScoreTable,
    pub calibration: Vec<LearnerCalibration>,
    pub failures: Vec<LearnerFailure>,
    pub skips: Vec<SkipRecord>,
    pub importance: Option<ImportanceReport>,
    /// Kept out of the serialized report so reruns compare byte for byte.
    #[serde(skip)]
    pub timings: Vec<TaskTiming>,
}

impl EvaluationReport {
    /// Learners ordered by scoring-rule skill, best first; failed learners last.
    pub fn ranking(&self) -> Vec<(&str, Option<f64>)> {
        let mut rows: Vec<(&str, Option<f64>)> = self
            .scores
            .learners
            .iter()
            .map(|r| (r.learner.as_str(), r.scoring_rule_skill))
            .collect();
        rows.sort_by(|a, b| match (a.1, b.1) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        rows
    }
}

struct Task {
    learner: usize,
    fold: usize,
    level: Option<usize>,
}

struct FoldData {
    train_x: Matrix,
    train_y: Vec<f64>,
    test_x: Matrix,
    test_idx: Vec<usize>,
}

/// K-fold comparison of every configured learner against the benchmark.
///
/// Every (fold, learner, level) fit runs as an independent task on a pool of
/// `jobs` threads; results are merged in a fixed order, so the report does
/// not depend on `jobs`. A learner whose fit fails in any task is reported
/// as failed and scored as null.
pub fn run_benchmark(
    dataset: &Dataset,
    cfg: &BenchmarkConfig,
    jobs: usize,
) -> Result<EvaluationReport, BenchError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(BenchError::Config("empty dataset".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(dataset, cfg))
}

fn run_in_pool(dataset: &Dataset, cfg: &BenchmarkConfig) -> Result<EvaluationReport, BenchError> {
    let n = dataset.len();
    let grid = &cfg.levels;
    let nl = grid.len();
    let plan = kfold_split(
        n,
        cfg.folds,
        derive_seed(&[cfg.seed, 0xF01D]),
        cfg.fold_granularity,
        Some(dataset.station_index()),
    )?;
    let x = dataset.features();
    let y = dataset.targets();
    let folds: Vec<FoldData> = (0..cfg.folds)
        .map(|f| {
            let train = plan.train_indices(f);
            let test_idx = plan.test_indices(f);
            FoldData {
                train_x: x.select_rows(&train),
                train_y: train.iter().map(|&i| y[i]).collect(),
                test_x: x.select_rows(&test_idx),
                test_idx,
            }
        })
        .collect();

    let mut tasks = Vec::new();
    for fold in 0..cfg.folds {
        for (learner, entry) in cfg.learners.iter().enumerate() {
            if entry.model.is_multi_level() {
                tasks.push(Task { learner, fold, level: None });
            } else {
                tasks.extend((0..nl).map(|j| Task { learner, fold, level: Some(j) }));
            }
        }
    }
    log::info!("{} tasks over {} folds", tasks.len(), cfg.folds);

    let results: Vec<(Result<Vec<f64>, String>, f64)> = tasks
        .par_iter()
        .map(|t| {
            let d = &folds[t.fold];
            let spec = &cfg.learners[t.learner].model;
            let seed = derive_seed(&[cfg.seed, t.learner as u64, t.fold as u64, t.level.map_or(u64::MAX, |j| j as u64)]);
            let start = Instant::now();
            let out = match t.level {
                Some(j) => spec.fit_predict_level(&d.train_x, &d.train_y, &d.test_x, grid.levels()[j], seed),
                None => spec
                    .fit_predict_all(&d.train_x, &d.train_y, &d.test_x, grid, seed)
                    .map(|p| p.values().to_vec()),
            };
            let secs = start.elapsed().as_secs_f64();
            log::debug!("{} fold {} level {:?}: {secs:.2}s", cfg.learners[t.learner].name, t.fold, t.level);
            (out.map_err(|e| e.to_string()), secs)
        })
        .collect();

    let nlearn = cfg.learners.len();
    let mut values: Vec<Vec<f64>> = vec![vec![f64::NAN; n * nl]; nlearn];
    let mut failed: Vec<Option<String>> = vec![None; nlearn];
    let mut timings = Vec::with_capacity(tasks.len());
    for (t, (out, secs)) in tasks.iter().zip(results) {
        timings.push(TaskTiming {
            learner: cfg.learners[t.learner].name.clone(),
            fold: t.fold,
            level: t.level.map(|j| grid.levels()[j]),
            seconds: secs,
        });
        let test_idx = &folds[t.fold].test_idx;
        match out {
            Err(reason) => {
                failed[t.learner].get_or_insert(reason);
            }
            Ok(v) => match t.level {
                Some(j) => {
                    for (k, &i) in test_idx.iter().enumerate() {
                        values[t.learner][i * nl + j] = v[k];
                    }
                }
                None => {
                    for (k, &i) in test_idx.iter().enumerate() {
                        values[t.learner][i * nl..(i + 1) * nl].copy_from_slice(&v[k * nl..(k + 1) * nl]);
                    }
                }
            },
        }
    }

    let mut calibration = Vec::new();
    let mut failures = Vec::new();
    let mut preds: Vec<Option<QuantilePredictions>> = Vec::with_capacity(nlearn);
    for (l, entry) in cfg.learners.iter().enumerate() {
        if let Some(reason) = failed[l].take() {
            log::warn!("learner {} failed: {reason}", entry.name);
            failures.push(LearnerFailure { learner: entry.name.clone(), reason });
            preds.push(None);
            continue;
        }
        let raw = QuantilePredictions::new(std::mem::take(&mut values[l]), grid.clone())?;
        let (p, log) = calibrate(raw);
        calibration.push(LearnerCalibration { learner: entry.name.clone(), log });
        preds.push(Some(p));
    }
    let named: Vec<(String, Option<&QuantilePredictions>)> = cfg
        .learners
        .iter()
        .zip(&preds)
        .map(|(e, p)| (e.name.clone(), p.as_ref()))
        .collect();
    let scores = ScoreTable::compute(&named, &y, dataset.station_index(), grid, &cfg.benchmark)?;

    let importance = match &cfg.importance {
        None => None,
        Some(settings) => match fit_importance(dataset, grid, settings, cfg.seed) {
            Ok(r) => Some(r),
            Err(e) => {
                failures.push(LearnerFailure { learner: "importance".into(), reason: e.to_string() });
                None
            }
        },
    };

    Ok(EvaluationReport {
        config: cfg.clone(),
        n_samples: n,
        fold_sizes: plan.fold_sizes(),
        scores,
        calibration,
        failures,
        skips: Vec::new(),
        importance,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synth::{generate_synthetic, SyntheticScenario};
    use crate::scoring::skill;

    fn quick_learners() -> Vec<LearnerEntry> {
        vec![
            LearnerEntry::new("linear_qr", LearnerSpec::LinearQr { solver: SolverConfig::default() }),
            LearnerEntry::new("qrf", LearnerSpec::Qrf { forest: ForestConfig { n_trees: 20, ..Default::default() } }),
            LearnerEntry::new(
                "boost_leafwise",
                LearnerSpec::LeafwiseBoost {
                    boost: BoostSettings { n_iterations: Some(30), min_data_in_leaf: Some(20), ..Default::default() },
                },
            ),
            LearnerEntry::new("oracle", LearnerSpec::Oracle { scenario: ScenarioKind::Hetero }),
        ]
    }

    fn quick_config() -> BenchmarkConfig {
        BenchmarkConfig {
            learners: quick_learners(),
            importance: Some(BoostSettings { n_iterations: Some(10), min_data_in_leaf: Some(20), ..Default::default() }),
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn benchmark_only_has_zero_skill() {
        let d = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 300, 1));
        let cfg = BenchmarkConfig {
            learners: vec![quick_learners().remove(0)],
            importance: None,
            ..Default::default()
        };
        let r = run_benchmark(&d, &cfg, 1).unwrap();
        let row = r.scores.learner("linear_qr").unwrap();
        assert_eq!(row.scoring_rule_skill, Some(0.0));
        assert!(row.skill.iter().all(|s| *s == Some(0.0)));
    }

    #[test]
    fn report_is_complete_and_self_consistent() {
        let d = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 600, 2));
        let cfg = quick_config();
        let r = run_benchmark(&d, &cfg, 2).unwrap();
        assert_eq!(r.fold_sizes.iter().sum::<usize>(), 600);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.scores.learners.len(), 4);
        let bench = r.scores.learner("linear_qr").unwrap().clone();
        for row in &r.scores.learners {
            assert_eq!(row.coverage.len(), 9);
            assert!(row.coverage.iter().all(Option::is_some));
            for j in 0..9 {
                let s = skill(row.mean_score[j].unwrap(), bench.mean_score[j].unwrap()).unwrap();
                assert!((s - row.skill[j].unwrap()).abs() <= 1e-12);
            }
            let s = skill(row.mean_scoring_rule.unwrap(), bench.mean_scoring_rule.unwrap()).unwrap();
            assert!((s - row.scoring_rule_skill.unwrap()).abs() <= 1e-12);
        }
        let oracle = r.calibration.iter().find(|c| c.learner == "oracle").unwrap();
        assert_eq!(oracle.log.n_crossings_fixed, 0);
        let imp = r.importance.as_ref().unwrap();
        assert_eq!(imp.ranks.len(), 9);
        assert_eq!(r.timings.len(), 5 * (9 + 1 + 9 + 1));
        assert_eq!(r.ranking()[0].0, "oracle");
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let d = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 400, 3));
        let cfg = quick_config();
        let a = serde_json::to_string(&run_benchmark(&d, &cfg, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&run_benchmark(&d, &cfg, 4).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failing_learner_is_marked_not_fatal() {
        let d = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 200, 4));
        let mut learners = quick_learners();
        learners.push(LearnerEntry::new(
            "broken",
            LearnerSpec::LeafwiseBoost { boost: BoostSettings { min_data_in_leaf: Some(10_000), ..Default::default() } },
        ));
        let cfg = BenchmarkConfig { learners, importance: None, ..Default::default() };
        let r = run_benchmark(&d, &cfg, 1).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].learner, "broken");
        let row = r.scores.learner("broken").unwrap();
        assert!(row.coverage.iter().all(Option::is_none));
        assert_eq!(row.scoring_rule_skill, None);
        assert!(r.scores.learner("qrf").unwrap().scoring_rule_skill.is_some());
    }

    #[test]
    fn missing_benchmark_is_rejected() {
        let d = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 50, 4));
        let cfg = BenchmarkConfig { learners: quick_learners()[1..].to_vec(), ..Default::default() };
        assert!(matches!(run_benchmark(&d, &cfg, 1), Err(BenchError::MissingBenchmark(_))));
    }

    #[test]
    fn config_json_is_strict_and_round_trips() {
        let cfg = BenchmarkConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<BenchmarkConfig>(&s).unwrap(), cfg);
        let spec: LearnerSpec = serde_json::from_str(r#"{"kind":"qrf","forest":{"n_trees":7}}"#).unwrap();
        assert_eq!(spec, LearnerSpec::Qrf { forest: ForestConfig { n_trees: 7, ..Default::default() } });
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"qrf","trees":7}"#).is_err());
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"qrf","forest":{"ntree":7}}"#).is_err());
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"leafwise_boost","boost":{"eta":1}}"#).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[1, 2]), derive_seed(&[1, 2]));
    }
}
