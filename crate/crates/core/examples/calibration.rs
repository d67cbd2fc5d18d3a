//! Censoring at zero and crossing repair on raw multi-level predictions.

use precip_uq::calibrate::calibrate;
use precip_uq::{LevelGrid, QuantilePredictions};

fn main() {
    let grid = LevelGrid::new(vec![0.1, 0.5, 0.9]).unwrap();
    let raw = QuantilePredictions::from_rows(
        &[vec![-2.0, 4.0, 9.0], vec![1.0, 6.0, 5.5], vec![3.0, 2.0, 1.0]],
        grid,
    )
    .unwrap();
    let (fixed, log) = calibrate(raw.clone());
    for i in 0..raw.n_samples() {
        println!("{:?} -> {:?}", raw.row(i), fixed.row(i));
    }
    println!("{log:?}");
}
