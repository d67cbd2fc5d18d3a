//! Split-gain importance on the single-signal scenario: predictor 1 carries
//! the signal, the other sixteen are noise.

use precip_uq::bench::{fit_importance, generate_synthetic, BoostSettings, ScenarioKind, SyntheticScenario};
use precip_uq::cli::importance_table;
use precip_uq::LevelGrid;

fn main() {
    let data = generate_synthetic(&SyntheticScenario::new(ScenarioKind::SingleSignal, 5000, 0));
    let imp = fit_importance(&data, &LevelGrid::default(), &BoostSettings::default(), 0).unwrap();
    print!("{}", importance_table(&imp));
    for (a, g) in imp.levels.iter().zip(&imp.gains) {
        println!("share of predictor 1 at {a}: {:.3}", g[0] / g.iter().sum::<f64>());
    }
}
