//! Pinball loss, the quantile scoring rule, skill and coverage on a toy sample.

use precip_uq::scoring::{coverage, mean_quantile_score, pinball, quantile_scoring_rule, skill};
use precip_uq::LevelGrid;

fn main() {
    println!("pinball(3, 1, 0.5) = {}", pinball(3.0, 1.0, 0.5).unwrap());
    println!("pinball(0, 10, 0.9) = {}", pinball(0.0, 10.0, 0.9).unwrap());

    let grid = LevelGrid::new(vec![0.25, 0.75]).unwrap();
    println!("scoring rule((1, 3), y = 2) = {}", quantile_scoring_rule(&[1.0, 3.0], 2.0, &grid).unwrap());

    let y = [12.0, 40.5, 3.2, 0.0, 88.1, 27.3];
    let sharp = [15.0, 38.0, 5.0, 1.0, 70.0, 30.0];
    let flat = [30.0; 6];
    let (s, b) = (
        mean_quantile_score(&sharp, &y, 0.5).unwrap(),
        mean_quantile_score(&flat, &y, 0.5).unwrap(),
    );
    println!("median scores: sharp {s:.3}, constant {b:.3}, skill {:.3}", skill(s, b).unwrap());
    println!("coverage of the sharp forecast: {:.3}", coverage(&sharp, &y).unwrap());
}
