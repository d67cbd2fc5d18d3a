//! Seeded k-fold assignment by sample and by station.

use precip_uq::bench::{generate_synthetic, kfold_split, FoldGranularity, ScenarioKind, SyntheticScenario};

fn main() {
    let plan = kfold_split(91_623, 5, 0, FoldGranularity::BySample, None).unwrap();
    println!("by sample: {:?}", plan.fold_sizes());

    let data = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 1050, 0));
    let plan = kfold_split(data.len(), 5, 0, FoldGranularity::ByStation, Some(data.station_index())).unwrap();
    println!("by station ({} stations): {:?}", data.stations().len(), plan.fold_sizes());
    println!("fold 0: {} test / {} train rows", plan.test_indices(0).len(), plan.train_indices(0).len());
}
