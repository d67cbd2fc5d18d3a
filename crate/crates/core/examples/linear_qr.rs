//! Linear quantile regression at three levels on a heteroscedastic sample.

use precip_uq::bench::{generate_synthetic, ScenarioKind, SyntheticScenario};
use precip_uq::linear::{LinearQuantileModel, SolverConfig};
use precip_uq::scoring::{coverage, mean_quantile_score};

fn main() {
    let train = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 3000, 1));
    let test = generate_synthetic(&SyntheticScenario::new(ScenarioKind::Hetero, 2000, 2));
    for alpha in [0.1, 0.5, 0.9] {
        let m = LinearQuantileModel::fit(&train.features(), &train.targets(), alpha, &SolverConfig::default()).unwrap();
        let z = m.predict_matrix(&test.features()).unwrap();
        let y = test.targets();
        println!(
            "alpha {alpha}: held-out coverage {:.3}, mean pinball {:.3}",
            coverage(&z, &y).unwrap(),
            mean_quantile_score(&z, &y, alpha).unwrap()
        );
    }
}
