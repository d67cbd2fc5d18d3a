use rayon::prelude::*;

use super::binning::FeatureBinning;
use super::GrowthMode;

/// Node of a boosted tree; node 0 is the root. Rows with `code <= bin` on
/// `feature` go left; `threshold` is the matching raw-value edge.
#[derive(Debug, Clone, PartialEq)]
pub enum BoostNode {
    Split {
        feature: usize,
        bin: u32,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostTree {
    pub(crate) nodes: Vec<BoostNode>,
}

impl BoostTree {
    pub fn nodes(&self) -> &[BoostNode] {
        &self.nodes
    }

    /// Leaf node id reached by a row of bin codes.
    #[inline]
    pub fn leaf_id(&self, codes: &[u32]) -> usize {
        let mut id = 0;
        while let BoostNode::Split {
            feature,
            bin,
            left,
            right,
            ..
        } = &self.nodes[id]
        {
            id = if codes[*feature] <= *bin { *left } else { *right };
        }
        id
    }

    #[inline]
    fn leaf_id_columns(&self, codes: &[Vec<u32>], row: usize) -> usize {
        let mut id = 0;
        while let BoostNode::Split {
            feature,
            bin,
            left,
            right,
            ..
        } = &self.nodes[id]
        {
            id = if codes[*feature][row] <= *bin { *left } else { *right };
        }
        id
    }

    pub(crate) fn leaf_value_columns(&self, codes: &[Vec<u32>], row: usize) -> f64 {
        match self.nodes[self.leaf_id_columns(codes, row)] {
            BoostNode::Leaf { value } => value,
            BoostNode::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    pub fn leaf_value(&self, codes: &[u32]) -> f64 {
        match self.nodes[self.leaf_id(codes)] {
            BoostNode::Leaf { value } => value,
            BoostNode::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }
}

pub(crate) struct GrowParams {
    pub mode: GrowthMode,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_data_in_leaf: usize,
    pub min_split_gain: f64,
}

/// Gradient sum and row count per bin, for each candidate feature.
type Histogram = Vec<Vec<(f64, u32)>>;

#[derive(Clone, Copy)]
struct Split {
    slot: usize,
    bin: u32,
    gain: f64,
}

struct Candidate {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    hist: Option<Histogram>,
    best: Option<Split>,
}

struct Context<'a> {
    codes: &'a [Vec<u32>],
    binning: &'a FeatureBinning,
    grad: &'a [f64],
    features: &'a [usize],
    params: &'a GrowParams,
}

impl Context<'_> {
    fn histogram(&self, rows: &[u32]) -> Histogram {
        let build = |&f: &usize| {
            let mut h = vec![(0.0, 0u32); self.binning.n_bins(f)];
            let col = &self.codes[f];
            for &r in rows {
                let slot = &mut h[col[r as usize] as usize];
                slot.0 += self.grad[r as usize];
                slot.1 += 1;
            }
            h
        };
        if rows.len() >= 8192 {
            self.features.par_iter().map(build).collect()
        } else {
            self.features.iter().map(build).collect()
        }
    }

    fn best_split(&self, hist: &Histogram, rows: &[u32]) -> Option<Split> {
        let n = rows.len();
        let min = self.params.min_data_in_leaf.max(1);
        if n < 2 * min {
            return None;
        }
        let g_total: f64 = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let g_sq: f64 = rows.iter().map(|&r| self.grad[r as usize].powi(2)).sum();
        let parent = g_total * g_total / n as f64;
        let floor = self.params.min_split_gain.max(0.0) + 1e-9 * g_sq;
        let mut best: Option<Split> = None;
        for (slot, h) in hist.iter().enumerate() {
            let (mut gl, mut nl) = (0.0, 0usize);
            for (b, &(g, c)) in h.iter().enumerate().take(h.len().saturating_sub(1)) {
                gl += g;
                nl += c as usize;
                if c == 0 || nl < min {
                    continue;
                }
                let nr = n - nl;
                if nr < min {
                    break;
                }
                let gr = g_total - gl;
                let gain = gl * gl / nl as f64 + gr * gr / nr as f64 - parent;
                if gain > floor && best.is_none_or(|s| gain > s.gain) {
                    best = Some(Split {
                        slot,
                        bin: b as u32,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn evaluate(&self, cand: &mut Candidate) {
        if cand.depth >= self.params.max_depth || cand.rows.len() < 2 * self.params.min_data_in_leaf.max(1) {
            cand.best = None;
            return;
        }
        if cand.hist.is_none() {
            cand.hist = Some(self.histogram(&cand.rows));
        }
        cand.best = self.best_split(cand.hist.as_ref().expect("histogram built"), &cand.rows);
    }
}

/// Grows one tree structure; leaf values are left at zero. Returns the tree
/// and the bagged rows that reached each leaf.
pub(crate) fn grow(
    codes: &[Vec<u32>],
    binning: &FeatureBinning,
    grad: &[f64],
    rows: Vec<u32>,
    features: &[usize],
    params: &GrowParams,
) -> (BoostTree, Vec<(usize, Vec<u32>)>) {
    let ctx = Context {
        codes,
        binning,
        grad,
        features,
        params,
    };
    let mut nodes = vec![BoostNode::Leaf { value: 0.0 }];
    let mut root = Candidate {
        node: 0,
        depth: 0,
        rows,
        hist: None,
        best: None,
    };
    ctx.evaluate(&mut root);
    let mut open = vec![root];
    let mut finished: Vec<Candidate> = Vec::new();
    let mut n_leaves = 1;

    loop {
        if n_leaves >= params.max_leaves.max(1) {
            break;
        }
        let pick = match params.mode {
            // shallowest first, then node order: splits every level in turn
            GrowthMode::Levelwise => open
                .iter()
                .enumerate()
                .filter(|(_, c)| c.best.is_some())
                .min_by_key(|(_, c)| (c.depth, c.node))
                .map(|(i, _)| i),
            GrowthMode::Leafwise => open
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.best.map(|b| (i, b.gain, c.node)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
                .map(|(i, _, _)| i),
        };
        let Some(i) = pick else { break };
        let cand = open.swap_remove(i);
        let split = cand.best.expect("picked candidates have a split");
        let feature = features[split.slot];
        let col = &codes[feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            cand.rows.iter().partition(|&&r| col[r as usize] <= split.bin);

        let left = nodes.len();
        nodes.push(BoostNode::Leaf { value: 0.0 });
        nodes.push(BoostNode::Leaf { value: 0.0 });
        nodes[cand.node] = BoostNode::Split {
            feature,
            bin: split.bin,
            threshold: binning.upper_edge(feature, split.bin),
            gain: split.gain,
            left,
            right: left + 1,
        };
        n_leaves += 1;

        let depth = cand.depth + 1;
        let mut l = Candidate {
            node: left,
            depth,
            rows: left_rows,
            hist: None,
            best: None,
        };
        let mut r = Candidate {
            node: left + 1,
            depth,
            rows: right_rows,
            hist: None,
            best: None,
        };
        if depth < params.max_depth {
            // build the smaller child, derive the larger by subtraction
            let parent = cand.hist.expect("split candidates carry a histogram");
            let (small, large) = if l.rows.len() <= r.rows.len() {
                (&mut l, &mut r)
            } else {
                (&mut r, &mut l)
            };
            let hs = ctx.histogram(&small.rows);
            let hl: Histogram = parent
                .iter()
                .zip(&hs)
                .map(|(p, s)| p.iter().zip(s).map(|(a, b)| (a.0 - b.0, a.1 - b.1)).collect())
                .collect();
            small.hist = Some(hs);
            large.hist = Some(hl);
        }
        ctx.evaluate(&mut l);
        ctx.evaluate(&mut r);
        open.push(l);
        open.push(r);
    }

    finished.extend(open);
    let mut leaves: Vec<(usize, Vec<u32>)> = finished.into_iter().map(|c| (c.node, c.rows)).collect();
    leaves.sort_by_key(|l| l.0);
    (BoostTree { nodes }, leaves)
}
