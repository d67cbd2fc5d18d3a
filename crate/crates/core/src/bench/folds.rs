use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldGranularity {
    #[default]
    BySample,
    /// Whole stations go to one fold, so no station is in both train and test.
    ByStation,
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub granularity: FoldGranularity,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Held-out sample indices of fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Training sample indices for fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != f).collect()
    }
}

/// Sizes of `k` contiguous blocks over `n` items, larger blocks first.
fn block_sizes(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |f| n / k + usize::from(f < n % k))
}

/// Seeded shuffle followed by a block partition into `k` folds.
///
/// By-station plans shuffle and partition the stations of `station_index`
/// and need at least `k` of them.
pub fn kfold_split(
    n: usize,
    k: usize,
    seed: u64,
    granularity: FoldGranularity,
    station_index: Option<&BTreeMap<String, Vec<usize>>>,
) -> Result<FoldPlan, BenchError> {
    if k < 2 {
        return Err(BenchError::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![usize::MAX; n];
    match granularity {
        FoldGranularity::BySample => {
            if k > n {
                return Err(BenchError::Config(format!("{k} folds for {n} samples")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut start = 0;
            for (f, size) in block_sizes(n, k).enumerate() {
                for &i in &order[start..start + size] {
                    assignment[i] = f;
                }
                start += size;
            }
        }
        FoldGranularity::ByStation => {
            let index = station_index.ok_or_else(|| {
                BenchError::Config("by-station folds need a station index".into())
            })?;
            if k > index.len() {
                return Err(BenchError::Config(format!(
                    "{k} folds for {} stations",
                    index.len()
                )));
            }
            let mut stations: Vec<&Vec<usize>> = index.values().collect();
            stations.shuffle(&mut rng);
            let mut start = 0;
            for (f, size) in block_sizes(stations.len(), k).enumerate() {
                for members in &stations[start..start + size] {
                    for &i in members.iter() {
                        if i >= n || assignment[i] != usize::MAX {
                            return Err(BenchError::Config(
                                "station index does not partition the samples".into(),
                            ));
                        }
                        assignment[i] = f;
                    }
                }
                start += size;
            }
            if assignment.contains(&usize::MAX) {
                return Err(BenchError::Config(
                    "station index does not cover every sample".into(),
                ));
            }
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        granularity,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_into_five() {
        let plan = kfold_split(10, 5, 3, FoldGranularity::BySample, None).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        let mut all: Vec<usize> = (0..5).flat_map(|f| plan.test_indices(f)).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn paper_sample_count() {
        let plan = kfold_split(91_623, 5, 0, FoldGranularity::BySample, None).unwrap();
        assert_eq!(plan.fold_sizes(), vec![18_325, 18_325, 18_325, 18_324, 18_324]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = kfold_split(100, 5, 11, FoldGranularity::BySample, None).unwrap();
        assert_eq!(a, kfold_split(100, 5, 11, FoldGranularity::BySample, None).unwrap());
        assert_ne!(a, kfold_split(100, 5, 12, FoldGranularity::BySample, None).unwrap());
    }

    #[test]
    fn by_station_keeps_stations_together() {
        let mut index = BTreeMap::new();
        for s in 0..7 {
            index.insert(format!("s{s}"), (0..4).map(|j| s * 4 + j).collect::<Vec<_>>());
        }
        let plan = kfold_split(28, 3, 5, FoldGranularity::ByStation, Some(&index)).unwrap();
        for members in index.values() {
            assert!(members.iter().all(|&i| plan.assignment[i] == plan.assignment[members[0]]));
        }
        assert_eq!(plan.fold_sizes().iter().sum::<usize>(), 28);
        assert!(kfold_split(28, 8, 5, FoldGranularity::ByStation, Some(&index)).is_err());
        assert!(kfold_split(28, 3, 5, FoldGranularity::ByStation, None).is_err());
    }

    #[test]
    fn too_many_folds() {
        assert!(kfold_split(4, 5, 0, FoldGranularity::BySample, None).is_err());
        assert!(kfold_split(4, 1, 0, FoldGranularity::BySample, None).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(n in 2usize..500, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let plan = kfold_split(n, k, seed, FoldGranularity::BySample, None).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in 0..k {
                let (tr, te) = (plan.train_indices(f), plan.test_indices(f));
                prop_assert_eq!(tr.len() + te.len(), n);
                prop_assert!(te.iter().all(|i| tr.binary_search(i).is_err()));
            }
        }
    }
}
