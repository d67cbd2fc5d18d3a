use serde::{Deserialize, Serialize};

use crate::data::Matrix;

/// Per-feature bin edges. Bin `b` holds values in `(edges[b-1], edges[b]]`;
/// the last bin is open above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinning {
    edges: Vec<Vec<f64>>,
}

/// Edge strictly between two adjacent distinct values, leaning on the midpoint.
fn edge_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + 0.5 * (hi - lo);
    if mid < hi {
        mid
    } else {
        lo
    }
}

impl FeatureBinning {
    /// Quantile-based edges with at most `max_bins` bins per feature, or one
    /// bin per distinct value when `max_bins` is `None`.
    pub fn fit(x: &Matrix, max_bins: Option<usize>) -> Self {
        let edges = (0..x.cols())
            .map(|f| {
                let mut col = x.column(f);
                col.sort_by(f64::total_cmp);
                feature_edges(&col, max_bins)
            })
            .collect();
        FeatureBinning { edges }
    }

    pub(crate) fn from_edges(edges: Vec<Vec<f64>>) -> Self {
        FeatureBinning { edges }
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    #[inline]
    pub fn bin_of(&self, feature: usize, v: f64) -> u32 {
        self.edges[feature].partition_point(|&e| e < v) as u32
    }

    /// Upper edge of `bin`; values at or below it fall at or below the bin.
    pub fn upper_edge(&self, feature: usize, bin: u32) -> f64 {
        self.edges[feature]
            .get(bin as usize)
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// Column-major bin codes for every row.
    pub fn transform(&self, x: &Matrix) -> Vec<Vec<u32>> {
        (0..x.cols())
            .map(|f| (0..x.rows()).map(|i| self.bin_of(f, x.get(i, f))).collect())
            .collect()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<u32> {
        row.iter().enumerate().map(|(f, &v)| self.bin_of(f, v)).collect()
    }
}

fn feature_edges(sorted: &[f64], max_bins: Option<usize>) -> Vec<f64> {
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in sorted {
        match distinct.last_mut() {
            Some((d, c)) if *d == v => *c += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let all_edges = || -> Vec<f64> {
        distinct
            .windows(2)
            .map(|w| edge_between(w[0].0, w[1].0))
            .collect()
    };
    let max_bins = match max_bins {
        None => return all_edges(),
        Some(m) => m.max(1),
    };
    if distinct.len() <= max_bins {
        return all_edges();
    }
    let n = sorted.len() as f64;
    let mut edges = Vec::with_capacity(max_bins - 1);
    let mut cum = 0usize;
    let mut k = 0;
    for b in 1..max_bins {
        let target = b as f64 * n / max_bins as f64;
        while k < distinct.len() - 1 && ((cum + distinct[k].1) as f64) < target {
            cum += distinct[k].1;
            k += 1;
        }
        if k >= distinct.len() - 1 {
            break;
        }
        let e = edge_between(distinct[k].0, distinct[k + 1].0);
        if edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    edges
}
