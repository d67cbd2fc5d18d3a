use super::*;
use crate::scoring::pinball;
use proptest::prelude::*;
use rand::Rng;

fn random_data(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        y.push(3.0 * row[0] + row[1 % p] * rng.random::<f64>() * 4.0);
        x.extend(row);
    }
    (Matrix::new(x, n, p), y)
}

fn small(mode: GrowthMode, alpha: f64) -> BoostConfig {
    BoostConfig {
        n_iterations: 20,
        min_data_in_leaf: 3,
        ..match mode {
            GrowthMode::Leafwise => BoostConfig::leafwise(alpha),
            GrowthMode::Levelwise => BoostConfig::levelwise(alpha),
        }
    }
}

#[test]
fn zero_iterations_predict_the_base_quantile() {
    let (x, y) = random_data(50, 3, 1);
    let cfg = BoostConfig {
        n_iterations: 0,
        ..small(GrowthMode::Leafwise, 0.9)
    };
    let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
    let q = crate::empirical_quantile(&y, 0.9);
    assert_eq!(m.base_prediction(), q);
    for i in 0..x.rows() {
        assert_eq!(m.predict(x.row(i)).unwrap(), q);
    }
}

#[test]
fn two_groups_are_separated_exactly() {
    let k = 20;
    let x = Matrix::new((0..2 * k).map(|i| (i >= k) as u8 as f64).collect(), 2 * k, 1);
    let y: Vec<f64> = (0..2 * k).map(|i| if i >= k { 10.0 } else { 0.0 }).collect();
    for mode in [GrowthMode::Levelwise, GrowthMode::Leafwise] {
        let cfg = BoostConfig {
            n_iterations: 5,
            learning_rate: 1.0,
            min_data_in_leaf: 1,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            ..small(mode, 0.5)
        };
        let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        assert!((m.predict(&[0.0]).unwrap() - 0.0).abs() < 1e-6, "{mode:?}");
        assert!((m.predict(&[1.0]).unwrap() - 10.0).abs() < 1e-6, "{mode:?}");
    }
}

#[test]
fn single_signal_feature_takes_almost_all_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, p) = (2000, 5);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        y.push(10.0 + 40.0 * row[0] + rng.random::<f64>());
        x.extend(row);
    }
    let x = Matrix::new(x, n, p);
    for mode in [GrowthMode::Levelwise, GrowthMode::Leafwise] {
        let cfg = BoostConfig {
            n_iterations: 50,
            min_data_in_leaf: 20,
            ..small(mode, 0.5)
        };
        let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        let g = m.total_gain();
        let share = g[0] / g.iter().sum::<f64>();
        assert!(share > 0.9, "{mode:?}: share {share}");
    }
}

#[test]
fn fits_are_deterministic_per_seed() {
    let (x, y) = random_data(300, 4, 3);
    for mode in [GrowthMode::Levelwise, GrowthMode::Leafwise] {
        let cfg = small(mode, 0.25);
        let a = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        let b = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = BoostEnsemble::fit(&x, &y, &BoostConfig { seed: 99, ..cfg }).unwrap();
        assert_ne!(a.trees(), c.trees());
    }
}

#[test]
fn shifting_targets_shifts_predictions() {
    let (x, y) = random_data(200, 3, 4);
    let y: Vec<f64> = y.iter().map(|v| (v * 3.0).round()).collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 7.0).collect();
    for mode in [GrowthMode::Levelwise, GrowthMode::Leafwise] {
        let cfg = BoostConfig {
            learning_rate: 0.5,
            ..small(mode, 0.75)
        };
        let a = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        let b = BoostEnsemble::fit(&x, &shifted, &cfg).unwrap();
        for i in 0..x.rows() {
            let (pa, pb) = (a.predict(x.row(i)).unwrap(), b.predict(x.row(i)).unwrap());
            assert!((pb - pa - 7.0).abs() < 1e-9, "{mode:?} row {i}");
        }
    }
}

#[test]
fn training_loss_never_increases_without_row_sampling() {
    let (x, y) = random_data(400, 4, 5);
    for mode in [GrowthMode::Levelwise, GrowthMode::Leafwise] {
        for alpha in [0.025, 0.5, 0.975] {
            let cfg = BoostConfig {
                bagging_fraction: 1.0,
                ..small(mode, alpha)
            };
            let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
            let l = m.train_loss();
            assert_eq!(l.len(), cfg.n_iterations + 1);
            assert!(l.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{mode:?} {alpha}: {l:?}");
            // loss agrees with predictions
            let direct = (0..x.rows())
                .map(|i| pinball(m.predict(x.row(i)).unwrap(), y[i], alpha).unwrap())
                .sum::<f64>()
                / x.rows() as f64;
            assert!((direct - l[l.len() - 1]).abs() < 1e-9);
        }
    }
}

#[test]
fn renewed_leaves_minimize_in_leaf_pinball() {
    let (x, y) = random_data(150, 3, 6);
    let alpha = 0.3;
    let cfg = BoostConfig {
        n_iterations: 1,
        learning_rate: 1.0,
        bagging_fraction: 1.0,
        feature_fraction: 1.0,
        ..small(GrowthMode::Leafwise, alpha)
    };
    let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
    let tree = &m.trees()[0];
    let base = m.base_prediction();
    let mut groups: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for i in 0..x.rows() {
        let codes = m.binning().transform_row(x.row(i));
        groups.entry(tree.leaf_id(&codes)).or_default().push(y[i] - base);
    }
    assert!(groups.len() > 1);
    for (leaf, resid) in groups {
        let BoostNode::Leaf { value } = tree.nodes()[leaf] else {
            panic!("not a leaf")
        };
        let loss = |c: f64| resid.iter().map(|&r| pinball(c, r, alpha).unwrap()).sum::<f64>();
        let (lo, hi) = resid.iter().fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
        for k in 0..=2000 {
            let c = lo + (hi - lo) * k as f64 / 2000.0;
            assert!(loss(value) <= loss(c) + 1e-9, "leaf {leaf}");
        }
    }
}

#[test]
fn total_gain_sums_split_gains() {
    let (x, y) = random_data(300, 4, 8);
    let m = BoostEnsemble::fit(&x, &y, &small(GrowthMode::Leafwise, 0.5)).unwrap();
    let mut per = vec![0.0; 4];
    for t in m.trees() {
        for node in t.nodes() {
            if let BoostNode::Split { feature, gain, .. } = node {
                assert!(*gain > 0.0);
                per[*feature] += gain;
            }
        }
    }
    for (a, b) in per.iter().zip(m.total_gain()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn leafwise_respects_leaf_and_size_limits() {
    let (x, y) = random_data(500, 3, 9);
    let cfg = BoostConfig {
        max_leaves: 6,
        min_data_in_leaf: 25,
        bagging_fraction: 1.0,
        ..small(GrowthMode::Leafwise, 0.5)
    };
    let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
    for t in m.trees() {
        let leaves = t.nodes().iter().filter(|n| matches!(n, BoostNode::Leaf { .. })).count();
        assert!(leaves <= 6);
        let mut counts = std::collections::HashMap::new();
        for i in 0..x.rows() {
            *counts.entry(t.leaf_id(&m.binning().transform_row(x.row(i)))).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 25));
    }
}

#[test]
fn config_errors() {
    let (x, y) = random_data(10, 2, 1);
    let cfg = small(GrowthMode::Leafwise, 0.5);
    assert!(matches!(
        BoostEnsemble::fit(&x, &y, &BoostConfig { min_data_in_leaf: 11, ..cfg }),
        Err(FitError::Config(_))
    ));
    assert!(BoostEnsemble::fit(&x, &y, &BoostConfig { bagging_fraction: 0.0, ..cfg }).is_err());
    assert!(BoostEnsemble::fit(&x, &y, &BoostConfig { max_bins: 256, ..cfg }).is_err());
    assert_eq!(
        BoostEnsemble::fit(&x, &y, &BoostConfig { alpha: 1.0, ..cfg }),
        Err(FitError::InvalidLevel(1.0))
    );
    let m = BoostEnsemble::fit(&x, &y, &BoostConfig { min_data_in_leaf: 1, ..cfg }).unwrap();
    assert!(matches!(m.predict(&[1.0]), Err(FitError::FeatureLength { .. })));
}

#[test]
fn container_round_trip() {
    let (x, y) = random_data(200, 3, 10);
    let m = BoostEnsemble::fit(&x, &y, &small(GrowthMode::Leafwise, 0.9)).unwrap();
    let mut buf = Vec::new();
    m.write_to(&mut buf).unwrap();
    let back = BoostEnsemble::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, m);
    buf.truncate(buf.len() - 3);
    assert!(BoostEnsemble::read_from(buf.as_slice()).is_err());
}

/// Brute-force best stump split over all thresholds between distinct values.
fn stump_oracle(x: &Matrix, grad: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = grad.len();
    let total: f64 = grad.iter().sum();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.cols() {
        let mut vals = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (mut gl, mut nl) = (0.0, 0);
            for i in 0..n {
                if x.get(i, f) <= t {
                    gl += grad[i];
                    nl += 1;
                }
            }
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let gain = gl * gl / nl as f64 + (total - gl).powi(2) / nr as f64 - total * total / n as f64;
            if best.is_none_or(|b| gain > b.2 + 1e-12) {
                best = Some((f, t, gain));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn levelwise_stump_matches_brute_force(
        n in 4usize..=100,
        seed in 0u64..1000,
        alpha in 0.05f64..0.95,
        min_leaf in 1usize..=3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2 * n).map(|_| (rng.random::<f64>() * 20.0).round()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[2 * i] + rng.random::<f64>() * 5.0).collect();
        let x = Matrix::new(x, n, 2);
        let cfg = BoostConfig {
            n_iterations: 1,
            max_depth: 1,
            min_data_in_leaf: min_leaf,
            bagging_fraction: 1.0,
            ..BoostConfig::levelwise(alpha)
        };
        let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        let base = m.base_prediction();
        let grad: Vec<f64> = y.iter().map(|&v| alpha - if v < base { 1.0 } else { 0.0 }).collect();
        let g_sq: f64 = grad.iter().map(|g| g * g).sum();
        let oracle = stump_oracle(&x, &grad, min_leaf).filter(|o| o.2 > 1e-9 * g_sq);
        match (&m.trees()[0].nodes()[0], oracle) {
            (BoostNode::Split { gain, .. }, Some((_, _, og))) => {
                prop_assert!((gain - og).abs() <= 1e-9 * og.max(1.0));
            }
            (BoostNode::Leaf { .. }, None) => {}
            (node, o) => prop_assert!(false, "tree {node:?} vs oracle {o:?}"),
        }
    }
}
