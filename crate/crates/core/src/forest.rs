//! Quantile regression forests.
//!
//! Trees are grown CART-style on bootstrap resamples with `mtry` candidate
//! features per node. Leaves keep the training indices that reached them, so a
//! query point receives a weight on every training target and any quantile is
//! read off the weighted empirical distribution. One fitted forest answers all
//! quantile levels.

use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{
    read_container, write_container, ContainerError, PayloadReader, PayloadWriter,
};
use crate::data::{Dataset, Matrix};
use crate::scoring::LevelGrid;
use crate::FitError;

const CONTAINER_KIND: &[u8; 4] = b"QRF1";
const CONTAINER_VERSION: u32 = 1;

/// Cumulative weight within this distance below a level counts as reaching it.
const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| n_features.div_ceil(3))
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Distinct training indices that fell into this leaf, ascending.
    Leaf { members: Vec<u32> },
}

/// A binary tree; node 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    seed: u64,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn leaf_members(&self, x: &[f64]) -> &[u32] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { members } => return members,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForest {
    trees: Vec<RegressionTree>,
    targets: Vec<f64>,
    n_features: usize,
    config: ForestConfig,
}

/// Working state for growing one tree over a bag of training rows.
struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    /// Training row of each bag position.
    rows: Vec<u32>,
    /// Per feature: bag positions sorted by that feature; every node owns the
    /// same `[start, end)` range in each of these arrays.
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    mtry: usize,
    min_leaf: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    n_left: usize,
    gain: f64,
}

impl Grower<'_> {
    fn best_split(&self, start: usize, end: usize, features: &[usize]) -> Option<BestSplit> {
        let n = end - start;
        if n < 2 * self.min_leaf {
            return None;
        }
        let slice = &self.order[0][start..end];
        let mean = slice.iter().map(|&p| self.y[self.rows[p as usize] as usize]).sum::<f64>() / n as f64;
        let sst: f64 = slice
            .iter()
            .map(|&p| (self.y[self.rows[p as usize] as usize] - mean).powi(2))
            .sum();
        if sst <= 0.0 {
            return None;
        }
        let mut best: Option<BestSplit> = None;
        for &f in features {
            let ord = &self.order[f][start..end];
            let mut sum_left = 0.0;
            for k in 0..n - 1 {
                let row = self.rows[ord[k] as usize] as usize;
                sum_left += self.y[row] - mean;
                let n_left = k + 1;
                if n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let xv = self.x.get(row, f);
                let xn = self.x.get(self.rows[ord[k + 1] as usize] as usize, f);
                if xv >= xn {
                    continue;
                }
                // centred sums: total is zero, so the right sum is -sum_left
                let gain = sum_left * sum_left * (1.0 / n_left as f64 + 1.0 / (n - n_left) as f64);
                if gain > 1e-12 * sst && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = 0.5 * (xv + xn);
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < xn { mid } else { xv },
                        n_left,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, split: &BestSplit) {
        for &p in &self.order[split.feature][start..end] {
            let row = self.rows[p as usize] as usize;
            self.goes_left[p as usize] = self.x.get(row, split.feature) <= split.threshold;
        }
        for f in 0..self.order.len() {
            self.scratch.clear();
            let seg = &mut self.order[f][start..end];
            let mut w = 0;
            for i in 0..seg.len() {
                let p = seg[i];
                if self.goes_left[p as usize] {
                    seg[w] = p;
                    w += 1;
                } else {
                    self.scratch.push(p);
                }
            }
            seg[w..].copy_from_slice(&self.scratch);
        }
    }

    fn leaf(&self, start: usize, end: usize) -> TreeNode {
        let mut members: Vec<u32> = self.order[0][start..end]
            .iter()
            .map(|&p| self.rows[p as usize])
            .collect();
        members.sort_unstable();
        members.dedup();
        TreeNode::Leaf { members }
    }
}

fn grow_tree(x: &Matrix, y: &[f64], cfg: &ForestConfig, tree_idx: usize) -> RegressionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tree_idx as u64);
    let n = x.rows();
    let p = x.cols();
    let rows: Vec<u32> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n) as u32).collect()
    } else {
        (0..n as u32).collect()
    };
    let order: Vec<Vec<u32>> = (0..p)
        .map(|f| {
            let mut o: Vec<u32> = (0..rows.len() as u32).collect();
            o.sort_by(|&a, &b| {
                x.get(rows[a as usize] as usize, f)
                    .total_cmp(&x.get(rows[b as usize] as usize, f))
                    .then(a.cmp(&b))
            });
            o
        })
        .collect();
    let order = if p == 0 {
        vec![(0..rows.len() as u32).collect()]
    } else {
        order
    };
    let mut g = Grower {
        x,
        y,
        goes_left: vec![false; rows.len()],
        rows,
        order,
        scratch: Vec::new(),
        mtry: cfg.resolved_mtry(p),
        min_leaf: cfg.min_leaf.max(1),
    };

    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { members: vec![] }];
    let mut stack = vec![(0usize, 0usize, g.rows.len())];
    while let Some((id, start, end)) = stack.pop() {
        let split = if p == 0 {
            None
        } else {
            let mut feats = index::sample(&mut rng, p, g.mtry).into_vec();
            feats.sort_unstable();
            g.best_split(start, end, &feats)
        };
        match split {
            None => nodes[id] = g.leaf(start, end),
            Some(s) => {
                g.partition(start, end, &s);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { members: vec![] });
                nodes.push(TreeNode::Leaf { members: vec![] });
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                let mid = start + s.n_left;
                stack.push((left + 1, mid, end));
                stack.push((left, start, mid));
            }
        }
    }
    RegressionTree {
        nodes,
        seed: cfg.seed,
    }
}

impl QuantileForest {
    pub fn fit(x: &Matrix, y: &[f64], cfg: &ForestConfig) -> Result<Self, FitError> {
        crate::check_xy(x, y)?;
        if cfg.n_trees == 0 {
            return Err(FitError::Config("n_trees must be at least 1".into()));
        }
        if y.len() < cfg.min_leaf {
            return Err(FitError::Config(format!(
                "min_leaf {} exceeds sample count {}",
                cfg.min_leaf,
                y.len()
            )));
        }
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| grow_tree(x, y, cfg, t))
            .collect();
        Ok(QuantileForest {
            trees,
            targets: y.to_vec(),
            n_features: x.cols(),
            config: *cfg,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Weight of each training point for a query, ascending by index, zero
    /// weights omitted.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<(usize, f64)>, FitError> {
        if x.len() != self.n_features {
            return Err(FitError::FeatureLength {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let t = self.trees.len() as f64;
        let mut raw: Vec<(u32, f64)> = Vec::new();
        for tree in &self.trees {
            let m = tree.leaf_members(x);
            let w = 1.0 / (m.len() as f64 * t);
            raw.extend(m.iter().map(|&i| (i, w)));
        }
        raw.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (i, w) in raw {
            match out.last_mut() {
                Some(last) if last.0 == i as usize => last.1 += w,
                _ => out.push((i as usize, w)),
            }
        }
        Ok(out)
    }

    /// Weighted-ECDF quantiles (left-continuous inverse) at each level.
    pub fn predict(&self, x: &[f64], grid: &LevelGrid) -> Result<Vec<f64>, FitError> {
        let mut w = self.weights(x)?;
        w.sort_by(|a, b| self.targets[a.0].total_cmp(&self.targets[b.0]).then(a.0.cmp(&b.0)));
        let mut out = Vec::with_capacity(grid.len());
        let mut cum = 0.0;
        let mut k = 0;
        for &a in grid.levels() {
            while k < w.len() && cum + MASS_TOLERANCE < a {
                cum += w[k].1;
                k += 1;
            }
            let idx = if cum + MASS_TOLERANCE >= a { k.max(1) - 1 } else { w.len() - 1 };
            out.push(self.targets[w[idx].0]);
        }
        Ok(out)
    }

    pub fn predict_matrix(&self, x: &Matrix, grid: &LevelGrid) -> Result<Vec<f64>, FitError> {
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict(x.row(i), grid))
            .collect::<Result<_, _>>()?;
        Ok(rows.concat())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), ContainerError> {
        let header = serde_json::json!({
            "n_trees": self.trees.len(),
            "n_features": self.n_features,
            "n_targets": self.targets.len(),
            "config": self.config,
        });
        let mut p = PayloadWriter::new();
        p.f64s(&self.targets);
        for tree in &self.trees {
            p.u64(tree.seed);
            p.u64(tree.nodes.len() as u64);
            for node in &tree.nodes {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        p.u32(0);
                        p.u32(*feature as u32);
                        p.f64(*threshold);
                        p.u32(*left as u32);
                        p.u32(*right as u32);
                    }
                    TreeNode::Leaf { members } => {
                        p.u32(1);
                        p.u32s(members);
                    }
                }
            }
        }
        write_container(w, CONTAINER_KIND, CONTAINER_VERSION, &header, &p.into_bytes())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, ContainerError> {
        let (_, header, payload) = read_container(r, CONTAINER_KIND, CONTAINER_VERSION)?;
        let corrupt = |m: &str| ContainerError::Corrupt(m.to_string());
        let n_trees = header["n_trees"].as_u64().ok_or_else(|| corrupt("n_trees"))? as usize;
        let n_features = header["n_features"].as_u64().ok_or_else(|| corrupt("n_features"))? as usize;
        let config: ForestConfig = serde_json::from_value(header["config"].clone())?;
        let mut p = PayloadReader::new(&payload);
        let targets = p.f64s()?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let seed = p.u64()?;
            let n_nodes = p.u64()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(payload.len()));
            for _ in 0..n_nodes {
                let node = match p.u32()? {
                    0 => {
                        let feature = p.u32()? as usize;
                        let threshold = p.f64()?;
                        let left = p.u32()? as usize;
                        let right = p.u32()? as usize;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(corrupt("split index out of range"));
                        }
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    }
                    1 => {
                        let members = p.u32s()?;
                        if members.iter().any(|&m| m as usize >= targets.len()) {
                            return Err(corrupt("leaf member out of range"));
                        }
                        TreeNode::Leaf { members }
                    }
                    _ => return Err(corrupt("node tag")),
                };
                nodes.push(node);
            }
            trees.push(RegressionTree { nodes, seed });
        }
        p.finish()?;
        Ok(QuantileForest {
            trees,
            targets,
            n_features,
            config,
        })
    }
}

pub fn fit_qrf(train: &Dataset, cfg: &ForestConfig) -> Result<QuantileForest, FitError> {
    QuantileForest::fit(&train.features(), &train.targets(), cfg)
}

pub fn predict_qrf(
    forest: &QuantileForest,
    features: &[f64],
    grid: &LevelGrid,
) -> Result<Vec<f64>, FitError> {
    forest.predict(features, grid)
}
