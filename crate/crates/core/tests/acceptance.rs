//! End-to-end acceptance checks. Everything runs inside one test so that the
//! runtime budgets are measured without other tests competing for the CPU.
//!
//! cargo test --release --test acceptance -- --nocapture

use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use precip_uq::bench::{
    default_learners, fit_importance, generate_synthetic, kfold_split, run_benchmark, BenchmarkConfig,
    BoostSettings, FoldGranularity, LearnerEntry, LearnerSpec, ScenarioKind, SyntheticScenario,
};
use precip_uq::calibrate::{calibrate, fix_crossing};
use precip_uq::forest::{ForestConfig, QuantileForest, TreeNode};
use precip_uq::net::{smoothed_loss_and_grad, NetShape};
use precip_uq::scoring::{coverage, mean_quantile_score, pinball, quantile_scoring_rule, QuantilePredictions};
use precip_uq::{LevelGrid, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scoring_exactness() -> Outcome {
    let grid = LevelGrid::new(vec![0.25, 0.75]).map_err(|e| e.to_string())?;
    let cases = [
        ("pinball(3,1,0.5)", pinball(3.0, 1.0, 0.5).unwrap(), 1.0),
        ("pinball(0,10,0.9)", pinball(0.0, 10.0, 0.9).unwrap(), 9.0),
        ("qsr((1,3),2)", quantile_scoring_rule(&[1.0, 3.0], 2.0, &grid).unwrap(), 0.5),
    ];
    for (label, got, want) in cases {
        ensure((got - want).abs() <= 1e-12, || format!("{label} = {got}, want {want}"))?;
    }
    Ok("3 values exact".into())
}

fn strict_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_901);
    let y: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
    let mut best = (f64::INFINITY, f64::NAN);
    for k in 0..=6000 {
        let z = -3.0 + k as f64 * 1e-3;
        let s = mean_quantile_score(&vec![z; y.len()], &y, 0.9).map_err(|e| e.to_string())?;
        if s < best.0 {
            best = (s, z);
        }
    }
    // Φ⁻¹(0.9) from the normal CDF, independent of the library.
    let truth = 1.2815515655446004;
    ensure((best.1 - truth).abs() <= 0.05, || format!("argmin {} vs {truth}", best.1))?;
    Ok(format!("argmin {:.3}", best.1))
}

/// Leaf reached by `x`, routed independently of the library.
fn route(nodes: &[TreeNode], x: &[f64]) -> usize {
    let mut id = 0;
    while let TreeNode::Split { feature, threshold, left, right } = &nodes[id] {
        id = if x[*feature] <= *threshold { *left } else { *right };
    }
    id
}

fn qrf_oracle() -> Outcome {
    // The levels as exact decimals, in thousandths.
    let thousandths = [25i128, 50, 100, 250, 500, 750, 900, 950, 975];
    let grid = LevelGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for case in 0..25 {
        let n = rng.random_range(2..=30);
        let p = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| (rng.random_range(0..8) as f64) / 2.0).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64).collect();
        let cfg = ForestConfig {
            n_trees: rng.random_range(1..=5),
            mtry: Some(rng.random_range(1..=p)),
            min_leaf: rng.random_range(1..=4),
            bootstrap: rng.random_bool(0.7),
            seed: case,
        };
        let x = Matrix::from_rows(&rows, p);
        let forest = QuantileForest::fit(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let t = forest.trees().len() as i128;

        for _ in 0..10 {
            let q: Vec<f64> = (0..p).map(|_| (rng.random_range(-1..9) as f64) / 2.0).collect();
            // In-bag rows are exactly the rows stored in some leaf.
            let mut w = vec![Ratio::from_integer(0i128); n];
            for tree in forest.trees() {
                let nodes = tree.nodes();
                let in_bag: Vec<usize> = nodes
                    .iter()
                    .filter_map(|nd| match nd {
                        TreeNode::Leaf { members } => Some(members.iter().map(|&i| i as usize)),
                        _ => None,
                    })
                    .flatten()
                    .collect();
                let leaf = route(nodes, &q);
                let same: Vec<usize> = in_bag.into_iter().filter(|&i| route(nodes, &rows[i]) == leaf).collect();
                for &i in &same {
                    w[i] += Ratio::new(1, same.len() as i128 * t);
                }
            }
            let mut order: Vec<usize> = (0..n).filter(|&i| w[i] != Ratio::from_integer(0)).collect();
            order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
            let want: Vec<f64> = thousandths
                .iter()
                .map(|&a| {
                    let level = Ratio::new(a, 1000);
                    let mut cum = Ratio::from_integer(0);
                    for &i in &order {
                        cum += w[i];
                        if cum >= level {
                            return y[i];
                        }
                    }
                    y[*order.last().unwrap()]
                })
                .collect();
            let got = forest.predict(&q, &grid).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("case {case}: {got:?} vs oracle {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} queries over 25 forests match"))
}

fn calibration_invariants() -> Outcome {
    let grid = LevelGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let values: Vec<f64> = (0..n * grid.len())
        .map(|_| if rng.random_bool(0.05) { 0.0 } else { rng.random_range(-50.0..150.0) })
        .collect();
    let raw = QuantilePredictions::new(values, grid.clone()).map_err(|e| e.to_string())?;
    let (cal, log) = calibrate(raw);
    for i in 0..n {
        let r = cal.row(i);
        ensure(r.iter().all(|&v| v >= 0.0), || format!("row {i} negative: {r:?}"))?;
        ensure(r.windows(2).all(|w| w[0] <= w[1]), || format!("row {i} decreasing: {r:?}"))?;
    }
    let (again, changed) = fix_crossing(cal.clone());
    ensure(changed == 0 && again == cal, || format!("fix_crossing changed {changed} rows on a second pass"))?;
    Ok(format!("{n} vectors, {log:?}"))
}

fn synthetic_coverage() -> Outcome {
    let grid = LevelGrid::default();
    let oracle_test = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 5000, 2));
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 8000, 1));
    let (tx, ty) = (train.features(), train.targets());
    let (vx, vy) = (oracle_test.features(), oracle_test.targets());

    let mut learners = vec![(LearnerEntry::new("oracle", LearnerSpec::Oracle { scenario: ScenarioKind::Hetero }), 0.02)];
    learners.extend(default_learners().into_iter().map(|l| (l, 0.05)));
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for (l, tol) in &learners {
        let raw = l.model.fit_predict_all(&tx, &ty, &vx, &grid, 7).map_err(|e| e.to_string())?;
        let (p, _) = calibrate(raw);
        for (j, &a) in grid.levels().iter().enumerate() {
            let c = coverage(&p.column(j), &vy).map_err(|e| e.to_string())?;
            worst = worst.max((c - a).abs());
            if (c - a).abs() > *tol {
                misses.push(format!("{} at {a}: {c:.4} (±{tol})", l.name));
            }
        }
    }
    ensure(misses.is_empty(), || misses.join("; "))?;
    Ok(format!("largest deviation {worst:.4}"))
}

fn ranking_property() -> Outcome {
    let data = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 10_000, 0));
    let cfg = BenchmarkConfig::default();
    let report = run_benchmark(&data, &cfg, 1).map_err(|e| e.to_string())?;
    let skill_of = |name: &str| {
        report
            .scores
            .learner(name)
            .and_then(|r| r.scoring_rule_skill)
            .ok_or_else(|| format!("no scoring-rule skill for {name}"))
    };
    let leafwise = skill_of("boost_leafwise")?;
    let own = skill_of(&cfg.benchmark)?;
    ensure(own == 0.0, || format!("benchmark self-skill {own}"))?;
    ensure(leafwise > 0.03, || format!("leafwise skill {leafwise:.4}"))?;
    let ranking: Vec<String> = report
        .ranking()
        .iter()
        .map(|(n, s)| format!("{n}={:.4}", s.unwrap_or(f64::NAN)))
        .collect();
    Ok(ranking.join(" "))
}

fn importance_fidelity() -> Outcome {
    let data = generate_synthetic(&SyntheticScenario::new(ScenarioKind::SingleSignal, 10_000, 0));
    let grid = LevelGrid::default();
    let imp = fit_importance(&data, &grid, &BoostSettings::default(), 0).map_err(|e| e.to_string())?;
    let mut least = 1.0f64;
    for (j, a) in imp.levels.iter().enumerate() {
        ensure(imp.ranks[j][0] == 1, || format!("predictor 1 ranked {} at {a}", imp.ranks[j][0]))?;
        let share = imp.gains[j][0] / imp.gains[j].iter().sum::<f64>();
        least = least.min(share);
        ensure(share > 0.9, || format!("predictor 1 share {share:.4} at {a}"))?;
    }
    Ok(format!("smallest gain share {least:.4}"))
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let configs = 120;
    for c in 0..configs {
        let shape = NetShape { inputs: rng.random_range(1..=5), hidden: rng.random_range(1..=6) };
        let n = rng.random_range(1..=25);
        let x = Matrix::new((0..n * shape.inputs).map(|_| rng.sample(StandardNormal)).collect(), n, shape.inputs);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let alpha = rng.random_range(0.01..0.99);
        let eps = 10f64.powf(rng.random_range(-2.0..0.0));
        let params: Vec<f64> = (0..shape.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; params.len()];
        smoothed_loss_and_grad(shape, &params, &x, &y, alpha, eps, &mut grad);
        let mut scratch = vec![0.0; params.len()];
        let mut fd = vec![0.0; params.len()];
        for k in 0..params.len() {
            let h = 1e-6 * params[k].abs().max(1.0);
            let mut p = params.clone();
            p[k] = params[k] + h;
            let up = smoothed_loss_and_grad(shape, &p, &x, &y, alpha, eps, &mut scratch);
            p[k] = params[k] - h;
            let down = smoothed_loss_and_grad(shape, &p, &x, &y, alpha, eps, &mut scratch);
            fd[k] = (up - down) / (2.0 * h);
        }
        // Relative error of the gradient vector; single components near zero
        // are dominated by the difference quotient's own rounding.
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|b| b * b).sum::<f64>().sqrt());
        let rel = if norm == 0.0 { diff } else { diff / norm };
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || format!("config {c}: relative error {rel:.2e}"))?;
    }
    Ok(format!("{configs} configurations, worst relative error {worst:.2e}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |jobs: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("jobs{jobs}"));
        let status = Command::new(env!("CARGO_BIN_EXE_precip-uq"))
            .args(["benchmark", "--synth", "hetero", "--n", "2000", "--seed", "11", "--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
    };
    let (a, b) = (run("1")?, run("8")?);
    ensure(a == b, || "report.json differs between --jobs 1 and --jobs 8".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn fold_arithmetic() -> Outcome {
    let plan = kfold_split(91_623, 5, 0, FoldGranularity::BySample, None).map_err(|e| e.to_string())?;
    let mut sizes = plan.fold_sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    ensure(sizes == [18_325, 18_325, 18_325, 18_324, 18_324], || format!("{sizes:?}"))?;
    Ok(format!("{sizes:?}"))
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, name: "scoring exactness", budget: Duration::from_secs(1), run: scoring_exactness },
        Criterion { id: 2, name: "strict consistency", budget: Duration::from_secs(10), run: strict_consistency },
        Criterion { id: 3, name: "qrf oracle equivalence", budget: Duration::from_secs(30), run: qrf_oracle },
        Criterion { id: 4, name: "calibration invariants", budget: Duration::from_secs(5), run: calibration_invariants },
        Criterion { id: 5, name: "synthetic coverage", budget: Duration::from_secs(300), run: synthetic_coverage },
        Criterion { id: 6, name: "ranking property", budget: Duration::from_secs(900), run: ranking_property },
        Criterion { id: 7, name: "importance fidelity", budget: Duration::from_secs(300), run: importance_fidelity },
        Criterion { id: 8, name: "gradient checks", budget: Duration::from_secs(30), run: gradient_checks },
        Criterion { id: 9, name: "determinism", budget: Duration::from_secs(900), run: determinism },
        Criterion { id: 10, name: "fold arithmetic", budget: Duration::from_secs(1), run: fold_arithmetic },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > c.budget => Err(format!("{d}; over budget {:?}", c.budget)),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => ("FAIL", e.clone()),
        };
        println!("{tag} criterion {:>2} {:<24} {:>8.2}s  {detail}", c.id, c.name, elapsed.as_secs_f64());
        if outcome.is_err() {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
