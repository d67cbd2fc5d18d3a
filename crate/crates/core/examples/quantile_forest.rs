//! Quantile regression forest: one fit, all levels, plus the per-query
//! training weights and a save/load round trip.

use precip_uq::bench::{generate_synthetic, ScenarioKind, SyntheticScenario};
use precip_uq::forest::{ForestConfig, QuantileForest};
use precip_uq::LevelGrid;

fn main() {
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 2000, 1));
    let cfg = ForestConfig { n_trees: 100, seed: 3, ..Default::default() };
    let forest = QuantileForest::fit(&train.features(), &train.targets(), &cfg).unwrap();

    let query = train.samples()[0].predictors;
    let grid = LevelGrid::default();
    let q = forest.predict(&query, &grid).unwrap();
    for (a, v) in grid.levels().iter().zip(&q) {
        println!("q{a:<6} {v:8.2}");
    }
    let w = forest.weights(&query).unwrap();
    println!("{} training points carry weight; total {:.6}", w.len(), w.iter().map(|p| p.1).sum::<f64>());

    let mut buf = Vec::new();
    forest.write_to(&mut buf).unwrap();
    let back = QuantileForest::read_from(buf.as_slice()).unwrap();
    println!("saved {} bytes; reload identical: {}", buf.len(), back == forest);
}
