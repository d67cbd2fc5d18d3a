//! Quantile gradient boosting in both growth modes, with split-gain totals
//! and a save/load round trip.

use precip_uq::bench::{generate_synthetic, ScenarioKind, SyntheticScenario};
use precip_uq::boost::{BoostConfig, BoostEnsemble};
use precip_uq::scoring::coverage;

fn main() {
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 4000, 1));
    let test = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 2000, 2));
    let (x, y, tx, ty) = (train.features(), train.targets(), test.features(), test.targets());

    for (label, cfg) in [("levelwise", BoostConfig::levelwise(0.75)), ("leafwise", BoostConfig::leafwise(0.75))] {
        let m = BoostEnsemble::fit(&x, &y, &cfg).unwrap();
        let z = m.predict_matrix(&tx).unwrap();
        let gain = m.total_gain();
        let top = (0..gain.len()).max_by(|&a, &b| gain[a].total_cmp(&gain[b])).unwrap();
        println!(
            "{label:<9} trees {:>3}, base {:.2}, coverage at 0.75 {:.3}, top predictor x{}",
            m.trees().len(),
            m.base_prediction(),
            coverage(&z, &ty).unwrap(),
            top + 1
        );
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = BoostEnsemble::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.predict_matrix(&tx).unwrap(), z);
    }
}
