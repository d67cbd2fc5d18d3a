//! A small cross-validated benchmark written to a report directory.
//!
//! cargo run --release --example benchmark -- [out_dir]

use precip_uq::bench::{
    generate_synthetic, run_benchmark, write_report, BenchmarkConfig, BoostSettings, LearnerEntry, LearnerSpec,
    ScenarioKind, SyntheticScenario,
};
use precip_uq::cli::render_report;
use precip_uq::forest::ForestConfig;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-report".into());
    let data = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 3000, 0));
    let cfg = BenchmarkConfig {
        learners: vec![
            LearnerEntry::new("linear_qr", LearnerSpec::LinearQr { solver: Default::default() }),
            LearnerEntry::new("qrf", LearnerSpec::Qrf { forest: ForestConfig { n_trees: 100, ..Default::default() } }),
            LearnerEntry::new("boost_leafwise", LearnerSpec::LeafwiseBoost { boost: BoostSettings::default() }),
            LearnerEntry::new("oracle", LearnerSpec::Oracle { scenario: ScenarioKind::Hetero }),
        ],
        ..Default::default()
    };
    let report = run_benchmark(&data, &cfg, 4).unwrap();
    print!("{}", render_report(&report));
    write_report(std::path::Path::new(&out), &report).unwrap();
    println!("written to {out}");
}
