//! A one-hidden-layer quantile regression network with a JSON round trip.

use precip_uq::bench::{generate_synthetic, ScenarioKind, SyntheticScenario};
use precip_uq::net::{QrnnConfig, QrnnModel};
use precip_uq::scoring::coverage;

fn main() {
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 2000, 1));
    let test = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 2000, 2));
    let cfg = QrnnConfig { n_trials: 2, ..Default::default() };
    let m = QrnnModel::fit(&train.features(), &train.targets(), 0.9, &cfg).unwrap();
    let z = m.predict_matrix(&test.features()).unwrap();
    println!("training loss {:.4}", m.train_loss);
    println!("held-out coverage at 0.9: {:.3}", coverage(&z, &test.targets()).unwrap());

    let json = m.to_json().unwrap();
    let back = QrnnModel::from_json(&json).unwrap();
    println!("{} bytes of JSON; reload identical: {}", json.len(), back.predict_matrix(&test.features()).unwrap() == z);
}
