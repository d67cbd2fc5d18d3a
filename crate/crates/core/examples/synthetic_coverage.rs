//! Trains every learner on a synthetic scenario and prints held-out coverage
//! at each level next to the analytic oracle's.
//!
//! cargo run --release --example synthetic_coverage -- [n_train] [n_test]

use std::time::Instant;

use precip_uq::bench::{default_learners, generate_synthetic, LearnerSpec, ScenarioKind, SyntheticScenario};
use precip_uq::calibrate::calibrate;
use precip_uq::scoring::coverage;
use precip_uq::LevelGrid;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("sample count"));
    let n_train = args.next().unwrap_or(8000);
    let n_test = args.next().unwrap_or(5000);
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, n_train, 1));
    let test = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, n_test, 2));
    let (tx, ty, vx, vy) = (train.features(), train.targets(), test.features(), test.targets());
    let grid = LevelGrid::default();

    let mut learners = default_learners();
    learners.push(precip_uq::bench::LearnerEntry::new(
        "oracle",
        LearnerSpec::Oracle { scenario: ScenarioKind::Hetero },
    ));
    print!("{:<16}", "learner");
    for a in grid.levels() {
        print!("{a:>7}");
    }
    println!("{:>9}", "seconds");
    for l in &learners {
        let start = Instant::now();
        let raw = l.model.fit_predict_all(&tx, &ty, &vx, &grid, 7).expect("fit");
        let (p, _) = calibrate(raw);
        print!("{:<16}", l.name);
        for j in 0..grid.len() {
            print!("{:>7.3}", coverage(&p.column(j), &vy).unwrap());
        }
        println!("{:>9.1}", start.elapsed().as_secs_f64());
    }
}
