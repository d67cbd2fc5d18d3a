//! Gradient-boosted quantile trees.
//!
//! Every iteration fits a tree to the pinball pseudo-gradient
//! `alpha - 1{y < F(x)}`, scoring splits by `G_L^2/n_L + G_R^2/n_R - G^2/n`
//! (row counts stand in for the absent curvature). Each leaf output is then
//! renewed to the empirical `alpha`-quantile of the in-leaf residuals and
//! added to the ensemble with the learning rate.
//!
//! Two growth modes are supported: depth-bounded level-wise trees over exact
//! split points, and best-first leaf-wise trees over quantile histograms with
//! per-iteration feature and row subsampling.

mod binning;
mod tree;

use std::io::{Read, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use binning::FeatureBinning;
pub use tree::{BoostNode, BoostTree};

use crate::container::{
    read_container, write_container, ContainerError, PayloadReader, PayloadWriter,
};
use crate::data::{Dataset, Matrix};
use crate::scoring::pinball_unchecked;
use crate::{sorted_quantile, FitError};
use tree::{grow, GrowParams};

const CONTAINER_KIND: &[u8; 4] = b"GBQ1";
const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    Levelwise,
    Leafwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    pub mode: GrowthMode,
    pub alpha: f64,
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_data_in_leaf: usize,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub min_split_gain: f64,
    /// Histogram bins per feature in leaf-wise mode; level-wise mode splits on
    /// every distinct value.
    pub max_bins: usize,
    pub seed: u64,
}

impl BoostConfig {
    /// Leaf-wise histogram boosting: depth 10, 500 leaves, 200 rows per leaf,
    /// rate 0.05, 400 iterations, 0.75 feature and row fractions, zero
    /// minimum gain.
    pub fn leafwise(alpha: f64) -> Self {
        BoostConfig {
            mode: GrowthMode::Leafwise,
            alpha,
            n_iterations: 400,
            learning_rate: 0.05,
            max_depth: 10,
            max_leaves: 500,
            min_data_in_leaf: 200,
            feature_fraction: 0.75,
            bagging_fraction: 0.75,
            min_split_gain: 0.0,
            max_bins: 255,
            seed: 0,
        }
    }

    /// Level-wise boosting: 500 stumps at rate 0.1 over exact splits, at
    /// least 10 rows per leaf, half of the rows per iteration.
    pub fn levelwise(alpha: f64) -> Self {
        BoostConfig {
            mode: GrowthMode::Levelwise,
            alpha,
            n_iterations: 500,
            learning_rate: 0.1,
            max_depth: 1,
            max_leaves: 2,
            min_data_in_leaf: 10,
            feature_fraction: 1.0,
            bagging_fraction: 0.5,
            min_split_gain: 0.0,
            max_bins: 255,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::Config(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(FitError::InvalidLevel(self.alpha));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad("feature_fraction must lie in (0, 1]");
        }
        if !(self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0) {
            return bad("bagging_fraction must lie in (0, 1]");
        }
        if self.max_bins < 2 || self.max_bins > 255 {
            return bad("max_bins must lie in [2, 255]");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.min_split_gain < 0.0 {
            return bad("min_split_gain must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostEnsemble {
    base_prediction: f64,
    trees: Vec<BoostTree>,
    total_gain: Vec<f64>,
    binning: FeatureBinning,
    config: BoostConfig,
    train_loss: Vec<f64>,
}

fn sample_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

impl BoostEnsemble {
    pub fn fit(x: &Matrix, y: &[f64], cfg: &BoostConfig) -> Result<Self, FitError> {
        cfg.validate()?;
        crate::check_xy(x, y)?;
        let n = y.len();
        if cfg.min_data_in_leaf > n {
            return Err(FitError::Config(format!(
                "min_data_in_leaf {} exceeds sample count {n}",
                cfg.min_data_in_leaf
            )));
        }
        let alpha = cfg.alpha;
        let binning = FeatureBinning::fit(
            x,
            match cfg.mode {
                GrowthMode::Leafwise => Some(cfg.max_bins),
                GrowthMode::Levelwise => None,
            },
        );
        let codes = binning.transform(x);
        let p = x.cols();

        let mut sorted = y.to_vec();
        sorted.sort_by(f64::total_cmp);
        let base = sorted_quantile(&sorted, alpha);
        let mut f = vec![base; n];
        let mut grad = vec![0.0; n];
        let mut total_gain = vec![0.0; p];
        let mut trees = Vec::with_capacity(cfg.n_iterations);
        let mean_loss = |f: &[f64]| {
            f.iter().zip(y).map(|(&fi, &yi)| pinball_unchecked(fi, yi, alpha)).sum::<f64>() / n as f64
        };
        let mut train_loss = vec![mean_loss(&f)];

        let params = GrowParams {
            mode: cfg.mode,
            max_depth: cfg.max_depth,
            max_leaves: match cfg.mode {
                GrowthMode::Levelwise => cfg.max_leaves.min(1usize << cfg.max_depth.min(30)),
                GrowthMode::Leafwise => cfg.max_leaves,
            },
            min_data_in_leaf: cfg.min_data_in_leaf,
            min_split_gain: cfg.min_split_gain,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n_feat = sample_count(cfg.feature_fraction, p.max(1)).min(p);
        let n_rows = sample_count(cfg.bagging_fraction, n);

        for _ in 0..cfg.n_iterations {
            for i in 0..n {
                grad[i] = alpha - if y[i] < f[i] { 1.0 } else { 0.0 };
            }
            let mut features: Vec<usize> = if n_feat == p {
                (0..p).collect()
            } else {
                index::sample(&mut rng, p, n_feat).into_vec()
            };
            features.sort_unstable();
            let mut rows: Vec<u32> = if n_rows == n {
                (0..n as u32).collect()
            } else {
                index::sample(&mut rng, n, n_rows).into_iter().map(|i| i as u32).collect()
            };
            rows.sort_unstable();

            let (mut tree, leaves) = grow(&codes, &binning, &grad, rows, &features, &params);
            for (node, members) in &leaves {
                let mut resid: Vec<f64> = members
                    .iter()
                    .map(|&r| y[r as usize] - f[r as usize])
                    .collect();
                resid.sort_by(f64::total_cmp);
                let value = if resid.is_empty() { 0.0 } else { sorted_quantile(&resid, alpha) };
                tree.nodes[*node] = BoostNode::Leaf { value };
            }
            for node in &tree.nodes {
                if let BoostNode::Split { feature, gain, .. } = node {
                    total_gain[*feature] += gain;
                }
            }
            for i in 0..n {
                f[i] += cfg.learning_rate * tree.leaf_value_columns(&codes, i);
            }
            train_loss.push(mean_loss(&f));
            trees.push(tree);
        }

        Ok(BoostEnsemble {
            base_prediction: base,
            trees,
            total_gain,
            binning,
            config: *cfg,
            train_loss,
        })
    }

    pub fn base_prediction(&self) -> f64 {
        self.base_prediction
    }

    pub fn trees(&self) -> &[BoostTree] {
        &self.trees
    }

    /// Total split gain per feature.
    pub fn total_gain(&self) -> &[f64] {
        &self.total_gain
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn binning(&self) -> &FeatureBinning {
        &self.binning
    }

    /// Mean training pinball loss after each iteration, starting with the
    /// constant initial prediction.
    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, FitError> {
        if features.len() != self.binning.n_features() {
            return Err(FitError::FeatureLength {
                expected: self.binning.n_features(),
                got: features.len(),
            });
        }
        let codes = self.binning.transform_row(features);
        let mut z = self.base_prediction;
        for t in &self.trees {
            z += self.config.learning_rate * t.leaf_value(&codes);
        }
        Ok(z)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>, FitError> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), ContainerError> {
        let header = serde_json::json!({
            "config": self.config,
            "base_prediction": self.base_prediction,
            "total_gain": self.total_gain,
            "n_trees": self.trees.len(),
        });
        let mut p = PayloadWriter::new();
        p.u64(self.binning.n_features() as u64);
        for f in 0..self.binning.n_features() {
            p.f64s(self.binning.edges(f));
        }
        p.f64s(&self.train_loss);
        for t in &self.trees {
            p.u64(t.nodes.len() as u64);
            for node in &t.nodes {
                match node {
                    BoostNode::Split {
                        feature,
                        bin,
                        threshold,
                        gain,
                        left,
                        right,
                    } => {
                        p.u32(0);
                        p.u32(*feature as u32);
                        p.u32(*bin);
                        p.f64(*threshold);
                        p.f64(*gain);
                        p.u32(*left as u32);
                        p.u32(*right as u32);
                    }
                    BoostNode::Leaf { value } => {
                        p.u32(1);
                        p.f64(*value);
                    }
                }
            }
        }
        write_container(w, CONTAINER_KIND, CONTAINER_VERSION, &header, &p.into_bytes())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, ContainerError> {
        let (_, header, payload) = read_container(r, CONTAINER_KIND, CONTAINER_VERSION)?;
        let corrupt = |m: &str| ContainerError::Corrupt(m.to_string());
        let config: BoostConfig = serde_json::from_value(header["config"].clone())?;
        let base_prediction = header["base_prediction"]
            .as_f64()
            .ok_or_else(|| corrupt("base_prediction"))?;
        let total_gain: Vec<f64> = serde_json::from_value(header["total_gain"].clone())?;
        let n_trees = header["n_trees"].as_u64().ok_or_else(|| corrupt("n_trees"))? as usize;

        let mut p = PayloadReader::new(&payload);
        let n_features = p.u64()? as usize;
        if n_features != total_gain.len() {
            return Err(corrupt("feature count"));
        }
        let mut edges = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            edges.push(p.f64s()?);
        }
        let binning = FeatureBinning::from_edges(edges);
        let train_loss = p.f64s()?;
        let mut trees = Vec::with_capacity(n_trees.min(payload.len()));
        for _ in 0..n_trees {
            let n_nodes = p.u64()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(payload.len()));
            for _ in 0..n_nodes {
                nodes.push(match p.u32()? {
                    0 => {
                        let feature = p.u32()? as usize;
                        let bin = p.u32()?;
                        let threshold = p.f64()?;
                        let gain = p.f64()?;
                        let left = p.u32()? as usize;
                        let right = p.u32()? as usize;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(corrupt("split index out of range"));
                        }
                        BoostNode::Split {
                            feature,
                            bin,
                            threshold,
                            gain,
                            left,
                            right,
                        }
                    }
                    1 => BoostNode::Leaf { value: p.f64()? },
                    _ => return Err(corrupt("node tag")),
                });
            }
            trees.push(BoostTree { nodes });
        }
        p.finish()?;
        Ok(BoostEnsemble {
            base_prediction,
            trees,
            total_gain,
            binning,
            config,
            train_loss,
        })
    }
}

pub fn fit_boost(train: &Dataset, cfg: &BoostConfig) -> Result<BoostEnsemble, FitError> {
    BoostEnsemble::fit(&train.features(), &train.targets(), cfg)
}

pub fn predict_boost(ensemble: &BoostEnsemble, features: &[f64]) -> Result<f64, FitError> {
    ensemble.predict(features)
}

#[cfg(test)]
mod tests;
