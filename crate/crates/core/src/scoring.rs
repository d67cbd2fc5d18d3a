//! Quantile scoring functions, the quantile scoring rule, skill scores and
//! sample coverage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("quantile level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("levels must be strictly increasing")]
    UnorderedLevels,
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate benchmark: benchmark score is zero")]
    DegenerateBenchmark,
    #[error("unknown learner {0}")]
    UnknownLearner(String),
    #[error("level {0} not in grid")]
    LevelNotInGrid(f64),
    #[error("non-finite prediction")]
    NonFinite,
}

/// The nine levels used throughout the benchmark.
pub const DEFAULT_LEVELS: [f64; 9] = [0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975];

fn check_level(alpha: f64) -> Result<(), ScoringError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ScoringError::InvalidLevel(alpha))
    }
}

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LevelGrid {
    levels: Vec<f64>,
}

impl LevelGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self, ScoringError> {
        if levels.is_empty() {
            return Err(ScoringError::Empty);
        }
        for &a in &levels {
            check_level(a)?;
        }
        if !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(ScoringError::UnorderedLevels);
        }
        Ok(LevelGrid { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn position(&self, alpha: f64) -> Option<usize> {
        self.levels.iter().position(|&a| a == alpha)
    }
}

impl Default for LevelGrid {
    fn default() -> Self {
        LevelGrid {
            levels: DEFAULT_LEVELS.to_vec(),
        }
    }
}

impl TryFrom<Vec<f64>> for LevelGrid {
    type Error = ScoringError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        LevelGrid::new(v)
    }
}

impl From<LevelGrid> for Vec<f64> {
    fn from(g: LevelGrid) -> Self {
        g.levels
    }
}

/// Predicted quantiles, one row per sample and one column per level.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantilePredictions {
    values: Vec<f64>,
    n_samples: usize,
    grid: LevelGrid,
    calibrated: bool,
}

impl QuantilePredictions {
    pub fn new(values: Vec<f64>, grid: LevelGrid) -> Result<Self, ScoringError> {
        if values.len() % grid.len() != 0 {
            return Err(ScoringError::LengthMismatch(values.len(), grid.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScoringError::NonFinite);
        }
        Ok(QuantilePredictions {
            n_samples: values.len() / grid.len(),
            values,
            grid,
            calibrated: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], grid: LevelGrid) -> Result<Self, ScoringError> {
        let mut values = Vec::with_capacity(rows.len() * grid.len());
        for r in rows {
            if r.len() != grid.len() {
                return Err(ScoringError::LengthMismatch(r.len(), grid.len()));
            }
            values.extend_from_slice(r);
        }
        QuantilePredictions::new(values, grid)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn grid(&self) -> &LevelGrid {
        &self.grid
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let l = self.grid.len();
        &self.values[i * l..(i + 1) * l]
    }

    pub(crate) fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let l = self.grid.len();
        self.values.chunks_exact_mut(l)
    }

    pub(crate) fn set_calibrated(&mut self) {
        self.calibrated = true;
    }

    /// Predictions at level column `j` for every sample.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.row(i)[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

#[inline]
pub(crate) fn pinball_unchecked(z: f64, y: f64, alpha: f64) -> f64 {
    let x = z - y;
    let ind = if x >= 0.0 { 1.0 } else { 0.0 };
    x * (ind - alpha)
}

/// Quantile scoring function `(z - y) * (1{z >= y} - alpha)`.
pub fn pinball(z: f64, y: f64, alpha: f64) -> Result<f64, ScoringError> {
    check_level(alpha)?;
    Ok(pinball_unchecked(z, y, alpha))
}

pub fn mean_quantile_score(z: &[f64], y: &[f64], alpha: f64) -> Result<f64, ScoringError> {
    check_level(alpha)?;
    check_pair(z, y)?;
    let terms: Vec<f64> = z
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| pinball_unchecked(zi, yi, alpha))
        .collect();
    Ok(pairwise_mean(&terms))
}

fn check_pair(z: &[f64], y: &[f64]) -> Result<(), ScoringError> {
    if z.len() != y.len() {
        return Err(ScoringError::LengthMismatch(z.len(), y.len()));
    }
    if z.is_empty() {
        return Err(ScoringError::Empty);
    }
    Ok(())
}

/// `1 - learner / benchmark`.
pub fn skill(score_learner: f64, score_benchmark: f64) -> Result<f64, ScoringError> {
    if score_benchmark == 0.0 {
        return Err(ScoringError::DegenerateBenchmark);
    }
    Ok(1.0 - score_learner / score_benchmark)
}

/// Sum of quantile scores across the levels of `grid` for one observation.
pub fn quantile_scoring_rule(zs: &[f64], y: f64, grid: &LevelGrid) -> Result<f64, ScoringError> {
    if zs.len() != grid.len() {
        return Err(ScoringError::LengthMismatch(zs.len(), grid.len()));
    }
    Ok(zs
        .iter()
        .zip(grid.levels())
        .map(|(&z, &a)| pinball_unchecked(z, y, a))
        .sum())
}

/// Fraction of predictions at or above the observation.
pub fn coverage(z: &[f64], y: &[f64]) -> Result<f64, ScoringError> {
    check_pair(z, y)?;
    let hits = z.iter().zip(y).filter(|(zi, yi)| zi >= yi).count();
    Ok(hits as f64 / z.len() as f64)
}

/// What a skill is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillMode {
    Level(f64),
    ScoringRule,
}

impl SkillMode {
    pub fn label(&self) -> String {
        match self {
            SkillMode::Level(a) => format!("{a}"),
            SkillMode::ScoringRule => "scoring_rule".to_string(),
        }
    }
}

/// A per-(learner, station) skill; `None` when the benchmark scores zero at
/// that station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSkill {
    pub learner: String,
    pub station_id: String,
    pub mode: SkillMode,
    pub skill: Option<f64>,
}

/// Per-sample loss for a mode: pinball at one level or the scoring rule.
fn sample_losses(
    preds: &QuantilePredictions,
    obs: &[f64],
    mode: SkillMode,
) -> Result<Vec<f64>, ScoringError> {
    if preds.n_samples() != obs.len() {
        return Err(ScoringError::LengthMismatch(preds.n_samples(), obs.len()));
    }
    match mode {
        SkillMode::Level(a) => {
            let j = preds
                .grid()
                .position(a)
                .ok_or(ScoringError::LevelNotInGrid(a))?;
            Ok((0..obs.len())
                .map(|i| pinball_unchecked(preds.row(i)[j], obs[i], a))
                .collect())
        }
        SkillMode::ScoringRule => (0..obs.len())
            .map(|i| quantile_scoring_rule(preds.row(i), obs[i], preds.grid()))
            .collect(),
    }
}

/// Skill of every learner against `benchmark`, restricted to each station.
pub fn per_station_skill(
    preds_by_learner: &[(String, &QuantilePredictions)],
    obs: &[f64],
    station_index: &BTreeMap<String, Vec<usize>>,
    benchmark: &str,
    mode: SkillMode,
) -> Result<Vec<StationSkill>, ScoringError> {
    let losses: Vec<(&str, Vec<f64>)> = preds_by_learner
        .iter()
        .map(|(name, p)| Ok((name.as_str(), sample_losses(p, obs, mode)?)))
        .collect::<Result<_, ScoringError>>()?;
    let bench = losses
        .iter()
        .find(|(n, _)| *n == benchmark)
        .map(|(_, l)| l)
        .ok_or_else(|| ScoringError::UnknownLearner(benchmark.to_string()))?;

    let station_mean = |l: &[f64], idx: &[usize]| -> f64 {
        let v: Vec<f64> = idx.iter().map(|&i| l[i]).collect();
        pairwise_mean(&v)
    };
    let mut out = Vec::new();
    for (name, l) in &losses {
        for (station, idx) in station_index {
            if idx.is_empty() {
                return Err(ScoringError::Empty);
            }
            let b = station_mean(bench, idx);
            out.push(StationSkill {
                learner: name.to_string(),
                station_id: station.clone(),
                mode,
                skill: skill(station_mean(l, idx), b).ok(),
            });
        }
    }
    Ok(out)
}

/// Summary statistics for a set of learners over one set of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub levels: LevelGrid,
    pub benchmark: String,
    pub learners: Vec<LearnerScores>,
    pub station_skills: Vec<StationSkill>,
}

/// Rows for one learner; every vector is indexed by level. `None` marks a
/// learner that produced no predictions or an undefined skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerScores {
    pub learner: String,
    pub mean_score: Vec<Option<f64>>,
    pub coverage: Vec<Option<f64>>,
    pub skill: Vec<Option<f64>>,
    pub mean_scoring_rule: Option<f64>,
    pub scoring_rule_skill: Option<f64>,
}

impl ScoreTable {
    /// Scores every learner; learners given as `None` get null cells.
    pub fn compute(
        learners: &[(String, Option<&QuantilePredictions>)],
        obs: &[f64],
        station_index: &BTreeMap<String, Vec<usize>>,
        grid: &LevelGrid,
        benchmark: &str,
    ) -> Result<ScoreTable, ScoringError> {
        if !learners.iter().any(|(n, _)| n == benchmark) {
            return Err(ScoringError::UnknownLearner(benchmark.to_string()));
        }
        let nl = grid.len();
        let mut rows = Vec::with_capacity(learners.len());
        for (name, preds) in learners {
            let mut row = LearnerScores {
                learner: name.clone(),
                mean_score: vec![None; nl],
                coverage: vec![None; nl],
                skill: vec![None; nl],
                mean_scoring_rule: None,
                scoring_rule_skill: None,
            };
            if let Some(p) = preds {
                if p.grid() != grid {
                    return Err(ScoringError::LengthMismatch(p.grid().len(), nl));
                }
                for (j, &a) in grid.levels().iter().enumerate() {
                    let z = p.column(j);
                    row.mean_score[j] = Some(mean_quantile_score(&z, obs, a)?);
                    row.coverage[j] = Some(coverage(&z, obs)?);
                }
                let s = sample_losses(p, obs, SkillMode::ScoringRule)?;
                row.mean_scoring_rule = Some(pairwise_mean(&s));
            }
            rows.push(row);
        }

        let bench = rows.iter().find(|r| r.learner == benchmark).cloned();
        if let Some(b) = bench {
            for r in rows.iter_mut() {
                for j in 0..nl {
                    r.skill[j] = match (r.mean_score[j], b.mean_score[j]) {
                        (Some(l), Some(bs)) => skill(l, bs).ok(),
                        _ => None,
                    };
                }
                r.scoring_rule_skill = match (r.mean_scoring_rule, b.mean_scoring_rule) {
                    (Some(l), Some(bs)) => skill(l, bs).ok(),
                    _ => None,
                };
            }
        }

        let available: Vec<(String, &QuantilePredictions)> = learners
            .iter()
            .filter_map(|(n, p)| p.map(|p| (n.clone(), p)))
            .collect();
        let mut station_skills = Vec::new();
        if available.iter().any(|(n, _)| n == benchmark) {
            let modes = grid
                .levels()
                .iter()
                .map(|&a| SkillMode::Level(a))
                .chain(std::iter::once(SkillMode::ScoringRule));
            for mode in modes {
                station_skills.extend(per_station_skill(
                    &available,
                    obs,
                    station_index,
                    benchmark,
                    mode,
                )?);
            }
        }

        Ok(ScoreTable {
            levels: grid.clone(),
            benchmark: benchmark.to_string(),
            learners: rows,
            station_skills,
        })
    }

    pub fn learner(&self, name: &str) -> Option<&LearnerScores> {
        self.learners.iter().find(|r| r.learner == name)
    }

    fn write_csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory csv write");
        for r in rows {
            w.write_record(&r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    /// One row per (learner, level).
    pub fn coverage_csv(&self) -> String {
        let mut rows = Vec::new();
        for r in &self.learners {
            for (j, a) in self.levels.levels().iter().enumerate() {
                rows.push(vec![r.learner.clone(), a.to_string(), fmt_opt(r.coverage[j])]);
            }
        }
        Self::write_csv(&["learner", "level", "coverage"], rows)
    }

    /// One row per (learner, level).
    pub fn skills_by_level_csv(&self) -> String {
        let mut rows = Vec::new();
        for r in &self.learners {
            for (j, a) in self.levels.levels().iter().enumerate() {
                rows.push(vec![
                    r.learner.clone(),
                    a.to_string(),
                    fmt_opt(r.mean_score[j]),
                    fmt_opt(r.skill[j]),
                ]);
            }
        }
        Self::write_csv(&["learner", "level", "mean_score", "skill"], rows)
    }

    /// One row per learner.
    pub fn scoring_rule_csv(&self) -> String {
        let rows = self
            .learners
            .iter()
            .map(|r| {
                vec![
                    r.learner.clone(),
                    fmt_opt(r.mean_scoring_rule),
                    fmt_opt(r.scoring_rule_skill),
                ]
            })
            .collect();
        Self::write_csv(&["learner", "mean_scoring_rule", "skill"], rows)
    }

    /// Keyed by station id; `mode` is a level or `scoring_rule`.
    pub fn station_skills_csv(&self) -> String {
        let rows = self
            .station_skills
            .iter()
            .map(|s| {
                vec![
                    s.station_id.clone(),
                    s.learner.clone(),
                    s.mode.label(),
                    fmt_opt(s.skill),
                ]
            })
            .collect();
        Self::write_csv(&["station_id", "learner", "mode", "skill"], rows)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
