//! Linear quantile regression fitted by minimizing a smoothed pinball loss
//! with a decreasing smoothing width.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::optim::{lbfgs, smoothed_pinball, smoothed_pinball_grad, LbfgsOptions};
use crate::{empirical_quantile, FitError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative plateau tolerance for each smoothing stage.
    pub tolerance: f64,
    pub max_iter_per_stage: usize,
    /// Initial smoothing width in units of the target scale.
    pub eps_start: f64,
    /// Final smoothing width in units of the target scale.
    pub eps_final: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-9,
            max_iter_per_stage: 200,
            eps_start: 0.5,
            eps_final: 1e-6,
        }
    }
}

/// Per-feature centring and scaling applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features with (numerically) zero spread; their coefficients stay zero.
    pub excluded: Vec<bool>,
}

impl Standardization {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut scale = vec![1.0; x.cols()];
        let mut excluded = vec![false; x.cols()];
        for j in 0..x.cols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean[j] = m;
            if sd <= 1e-12 * m.abs().max(1.0) {
                excluded[j] = true;
            } else {
                scale[j] = sd;
            }
        }
        Standardization {
            mean,
            scale,
            excluded,
        }
    }

    #[inline]
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.excluded[j] {
            0.0
        } else {
            (v - self.mean[j]) / self.scale[j]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantileModel {
    pub alpha: f64,
    /// Prediction at the feature means, in target units.
    pub intercept: f64,
    /// Target units per standardized feature unit.
    pub coefficients: Vec<f64>,
    pub standardization: Standardization,
}

impl LinearQuantileModel {
    pub fn fit(x: &Matrix, y: &[f64], alpha: f64, cfg: &SolverConfig) -> Result<Self, FitError> {
        crate::check_fit_inputs(x, y, alpha)?;
        let std = Standardization::fit(x);
        let active: Vec<usize> = (0..x.cols()).filter(|&j| !std.excluded[j]).collect();
        let n = x.rows();
        let p = active.len();

        // standardized design, column-major over active features
        let mut design = vec![0.0; n * p];
        for (k, &j) in active.iter().enumerate() {
            for i in 0..n {
                design[k * n + i] = std.apply(j, x.get(i, j));
            }
        }
        let y_center = y.iter().sum::<f64>() / n as f64;
        let y_sd = (y.iter().map(|v| (v - y_center).powi(2)).sum::<f64>() / n as f64).sqrt();
        let y_scale = if y_sd > 0.0 { y_sd } else { 1.0 };
        let yt: Vec<f64> = y.iter().map(|v| (v - y_center) / y_scale).collect();

        let mut theta = vec![0.0; p + 1];
        theta[0] = empirical_quantile(&yt, alpha);
        let opts = LbfgsOptions {
            max_iter: cfg.max_iter_per_stage,
            rel_tol: cfg.tolerance,
            grad_tol: 1e-12,
            ..Default::default()
        };
        let mut pred = vec![0.0; n];
        let mut eps = cfg.eps_start;
        loop {
            let objective = |t: &[f64], g: &mut [f64]| {
                pred.fill(t[0]);
                for k in 0..p {
                    let w = t[k + 1];
                    let col = &design[k * n..(k + 1) * n];
                    for (pi, c) in pred.iter_mut().zip(col) {
                        *pi += w * c;
                    }
                }
                let mut loss = 0.0;
                g.fill(0.0);
                let mut resid_grad = vec![0.0; n];
                for i in 0..n {
                    loss += smoothed_pinball(pred[i], yt[i], alpha, eps);
                    resid_grad[i] = smoothed_pinball_grad(pred[i], yt[i], alpha, eps);
                }
                g[0] = resid_grad.iter().sum::<f64>() / n as f64;
                for k in 0..p {
                    let col = &design[k * n..(k + 1) * n];
                    g[k + 1] = col.iter().zip(&resid_grad).map(|(c, r)| c * r).sum::<f64>() / n as f64;
                }
                loss / n as f64
            };
            theta = lbfgs(objective, theta, &opts).x;
            if eps <= cfg.eps_final {
                break;
            }
            eps = (eps * 0.5).max(cfg.eps_final);
        }

        let mut coefficients = vec![0.0; x.cols()];
        for (k, &j) in active.iter().enumerate() {
            coefficients[j] = theta[k + 1] * y_scale;
        }
        Ok(LinearQuantileModel {
            alpha,
            intercept: y_center + theta[0] * y_scale,
            coefficients,
            standardization: std,
        })
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, FitError> {
        if features.len() != self.coefficients.len() {
            return Err(FitError::FeatureLength {
                expected: self.coefficients.len(),
                got: features.len(),
            });
        }
        let mut z = self.intercept;
        for (j, (&c, &v)) in self.coefficients.iter().zip(features).enumerate() {
            z += c * self.standardization.apply(j, v);
        }
        Ok(z)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>, FitError> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

pub fn fit_linear_qr(
    train: &Dataset,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<LinearQuantileModel, FitError> {
    LinearQuantileModel::fit(&train.features(), &train.targets(), alpha, cfg)
}

pub fn predict_linear(model: &LinearQuantileModel, features: &[f64]) -> Result<f64, FitError> {
    model.predict(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::pinball;

    fn mean_loss(z: &[f64], y: &[f64], a: f64) -> f64 {
        z.iter().zip(y).map(|(&zi, &yi)| pinball(zi, yi, a).unwrap()).sum::<f64>() / y.len() as f64
    }

    fn intercept_only(y: &[f64], alpha: f64) -> LinearQuantileModel {
        let x = Matrix::new(vec![], y.len(), 0);
        LinearQuantileModel::fit(&x, y, alpha, &SolverConfig::default()).unwrap()
    }

    /// Grid search over constants; returns the minimizing interval.
    fn grid_oracle(y: &[f64], a: f64) -> (f64, f64) {
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let steps = 20_000;
        let vals: Vec<(f64, f64)> = (0..=steps)
            .map(|k| {
                let c = lo + (hi - lo) * k as f64 / steps as f64;
                (c, mean_loss(&vec![c; y.len()], y, a))
            })
            .collect();
        let best = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let arg: Vec<f64> = vals.iter().filter(|v| v.1 <= best + 1e-12).map(|v| v.0).collect();
        (arg[0], *arg.last().unwrap())
    }

    #[test]
    fn noiseless_line() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
        let x = Matrix::new(xs.clone(), 10, 1);
        let m = LinearQuantileModel::fit(&x, &y, 0.5, &SolverConfig::default()).unwrap();
        let z = m.predict_matrix(&x).unwrap();
        assert!(mean_loss(&z, &y, 0.5) < 1e-3);
        let at0 = m.intercept - m.coefficients[0] * m.standardization.mean[0] / m.standardization.scale[0];
        let slope = m.coefficients[0] / m.standardization.scale[0];
        assert!(at0.abs() < 1e-3, "{at0}");
        assert!((slope - 2.0).abs() < 1e-3, "{slope}");
        assert!((m.predict(&[5.0]).unwrap() - 10.0).abs() < 1e-3);
    }

    #[test]
    fn intercept_only_median() {
        let y: Vec<f64> = (1..=9).map(f64::from).collect();
        let (lo, hi) = grid_oracle(&y, 0.5);
        assert!((lo - 5.0).abs() < 1e-3 && (hi - 5.0).abs() < 1e-3);
        let m = intercept_only(&y, 0.5);
        assert!((m.intercept - 5.0).abs() < 1e-2, "{}", m.intercept);
    }

    #[test]
    fn intercept_only_upper_level_lands_in_interval() {
        let y: Vec<f64> = (1..=10).map(f64::from).collect();
        let (lo, hi) = grid_oracle(&y, 0.9);
        assert!((lo - 9.0).abs() < 1e-3 && (hi - 10.0).abs() < 1e-3);
        let m = intercept_only(&y, 0.9);
        assert!(m.intercept >= 9.0 - 1e-6 && m.intercept <= 10.0 + 1e-6, "{}", m.intercept);
    }

    #[test]
    fn intercept_only_matches_grid_oracle_on_random_problems() {
        let mut s = 99u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in [3usize, 7, 20, 50] {
            for &a in &[0.05, 0.25, 0.5, 0.8, 0.975] {
                let y: Vec<f64> = (0..n).map(|_| (rnd() * 100.0).round() / 4.0).collect();
                let (lo, hi) = grid_oracle(&y, a);
                let m = intercept_only(&y, a);
                let step = 2.0 * (hi - lo).abs().max(1.0) / 20_000.0 + 1e-3;
                assert!(m.intercept >= lo - step && m.intercept <= hi + step, "n={n} a={a} {} not in [{lo}, {hi}]", m.intercept);
            }
        }
    }

    /// Exact optimum of one-feature quantile regression: some optimal line
    /// interpolates two observations, so enumerate all pairs.
    fn pair_oracle(x: &[f64], y: &[f64], a: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if x[i] == x[j] {
                    continue;
                }
                let b = (y[j] - y[i]) / (x[j] - x[i]);
                let c = y[i] - b * x[i];
                let z: Vec<f64> = x.iter().map(|v| c + b * v).collect();
                best = best.min(mean_loss(&z, y, a));
            }
        }
        best
    }

    #[test]
    fn optimum_gap_against_vertex_enumeration() {
        let mut s = 7u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for &a in &[0.1, 0.5, 0.9] {
            let x: Vec<f64> = (0..30).map(|_| rnd() * 10.0).collect();
            let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v + (rnd() - 0.5) * (1.0 + v)).collect();
            let m = LinearQuantileModel::fit(&Matrix::new(x.clone(), 30, 1), &y, a, &SolverConfig::default()).unwrap();
            let z = m.predict_matrix(&Matrix::new(x.clone(), 30, 1)).unwrap();
            let got = mean_loss(&z, &y, a);
            let opt = pair_oracle(&x, &y, a);
            assert!(got <= opt + 1e-5, "alpha {a}: {got} vs optimum {opt}");
        }
    }

    #[test]
    fn never_worse_than_intercept_only_and_deterministic() {
        let mut s = 3u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 200;
        let data: Vec<f64> = (0..n * 4).map(|_| rnd()).collect();
        let x = Matrix::new(data, n, 4);
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x.get(i, 0) - x.get(i, 2) + rnd()).collect();
        for &a in &[0.1, 0.5, 0.9] {
            let full = LinearQuantileModel::fit(&x, &y, a, &SolverConfig::default()).unwrap();
            let base = intercept_only(&y, a);
            let lf = mean_loss(&full.predict_matrix(&x).unwrap(), &y, a);
            let lb = mean_loss(&vec![base.intercept; n], &y, a);
            assert!(lf <= lb + 1e-9);
            let again = LinearQuantileModel::fit(&x, &y, a, &SolverConfig::default()).unwrap();
            assert_eq!(again, full);
        }
    }

    #[test]
    fn constant_feature_gets_zero_coefficient() {
        let x = Matrix::from_rows(&[[1.0, 7.0], [2.0, 7.0], [3.0, 7.0], [4.0, 7.0]], 2);
        let m = LinearQuantileModel::fit(&x, &[1.0, 2.0, 3.0, 4.0], 0.5, &SolverConfig::default()).unwrap();
        assert_eq!(m.coefficients[1], 0.0);
        assert!(m.standardization.scale.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn zero_coefficients_predict_intercept() {
        let m = LinearQuantileModel {
            alpha: 0.5,
            intercept: 4.5,
            coefficients: vec![0.0; 3],
            standardization: Standardization {
                mean: vec![1.0; 3],
                scale: vec![2.0; 3],
                excluded: vec![false; 3],
            },
        };
        assert_eq!(m.predict(&[9.0, -3.0, 0.1]).unwrap(), 4.5);
        assert!(matches!(m.predict(&[1.0]), Err(FitError::FeatureLength { .. })));
    }

    #[test]
    fn non_finite_features_rejected() {
        let x = Matrix::new(vec![1.0, f64::NAN], 2, 1);
        assert!(matches!(
            LinearQuantileModel::fit(&x, &[1.0, 2.0], 0.5, &SolverConfig::default()),
            Err(FitError::NonFinite)
        ));
    }
}
