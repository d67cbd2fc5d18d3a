//! Quantile regression neural network: one hidden layer of `tanh` units
//! feeding a linear output, trained full-batch on the smoothed pinball loss
//! with the smoothing width annealed towards zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::linear::Standardization;
use crate::optim::{lbfgs, smoothed_pinball, smoothed_pinball_grad, LbfgsOptions};
use crate::scoring::pinball_unchecked;
use crate::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrnnConfig {
    pub hidden_width: usize,
    /// Optimizer iteration budget over the whole annealing schedule.
    pub epochs: usize,
    pub n_trials: usize,
    /// Initial weights are drawn from `Uniform(-init_range, init_range)`.
    pub init_range: f64,
    /// Smoothing widths in standardized target units.
    pub eps_start: f64,
    pub eps_final: f64,
    pub seed: u64,
}

impl Default for QrnnConfig {
    fn default() -> Self {
        QrnnConfig {
            hidden_width: 8,
            epochs: 500,
            n_trials: 1,
            init_range: 0.5,
            eps_start: 0.25,
            eps_final: 1e-6,
            seed: 0,
        }
    }
}

impl QrnnConfig {
    fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::Config(m.to_string()));
        if self.hidden_width == 0 {
            return bad("hidden_width must be at least 1");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if !(self.eps_final > 0.0 && self.eps_start >= self.eps_final) {
            return bad("need eps_start >= eps_final > 0");
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return bad("init_range must be positive");
        }
        Ok(())
    }

    /// Smoothing widths of the annealing stages, each a sixteenth of the last.
    fn eps_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.eps_start];
        while *out.last().expect("nonempty") > self.eps_final {
            out.push((out.last().expect("nonempty") / 16.0).max(self.eps_final));
        }
        out
    }
}

/// Flat parameter layout: input weights (`hidden x inputs`, row-major),
/// hidden biases, output weights, output bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub inputs: usize,
    pub hidden: usize,
}

impl NetShape {
    pub fn n_params(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    /// Standardized output for one standardized input row; `act` receives
    /// the hidden activations.
    #[inline]
    fn forward(&self, params: &[f64], row: &[f64], act: &mut [f64]) -> f64 {
        let (p, h) = (self.inputs, self.hidden);
        let (w1, rest) = params.split_at(h * p);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let mut out = b2[0];
        for k in 0..h {
            let w = &w1[k * p..(k + 1) * p];
            let a = (b1[k] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()).tanh();
            act[k] = a;
            out += w2[k] * a;
        }
        out
    }
}

/// Mean smoothed pinball loss of the network on standardized data, with its
/// gradient with respect to the flat parameters written to `grad`.
pub fn smoothed_loss_and_grad(
    shape: NetShape,
    params: &[f64],
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    eps: f64,
    grad: &mut [f64],
) -> f64 {
    let (p, h) = (shape.inputs, shape.hidden);
    assert_eq!(params.len(), shape.n_params());
    assert_eq!(grad.len(), shape.n_params());
    assert_eq!(x.cols(), p);
    grad.fill(0.0);
    let mut act = vec![0.0; h];
    let mut loss = 0.0;
    let w2_off = h * p + h;
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let z = shape.forward(params, row, &mut act);
        loss += smoothed_pinball(z, yi, alpha, eps);
        let dz = smoothed_pinball_grad(z, yi, alpha, eps);
        if dz == 0.0 {
            continue;
        }
        grad[w2_off + h] += dz;
        for k in 0..h {
            grad[w2_off + k] += dz * act[k];
            let da = dz * params[w2_off + k] * (1.0 - act[k] * act[k]);
            grad[h * p + k] += da;
            for (g, &v) in grad[k * p..(k + 1) * p].iter_mut().zip(row) {
                *g += da * v;
            }
        }
    }
    let n = y.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    loss / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrnnModel {
    pub alpha: f64,
    pub hidden_width: usize,
    pub params: Vec<f64>,
    pub input_standardization: Standardization,
    pub target_center: f64,
    pub target_scale: f64,
    pub config: QrnnConfig,
    /// Mean exact pinball loss on the training data, in target units.
    pub train_loss: f64,
}

impl QrnnModel {
    pub fn fit(x: &Matrix, y: &[f64], alpha: f64, cfg: &QrnnConfig) -> Result<Self, FitError> {
        crate::check_fit_inputs(x, y, alpha)?;
        cfg.validate()?;
        let n = y.len();
        let std = Standardization::fit(x);
        let mut xs = Vec::with_capacity(n * x.cols());
        for i in 0..n {
            xs.extend(x.row(i).iter().enumerate().map(|(j, &v)| std.apply(j, v)));
        }
        let xs = Matrix::new(xs, n, x.cols());
        let center = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();

        let shape = NetShape {
            inputs: x.cols(),
            hidden: cfg.hidden_width,
        };
        let schedule = cfg.eps_schedule();
        // half the budget for the widest stage, the rest shared evenly
        let first = (cfg.epochs / 2).max(1);
        let rest = if schedule.len() > 1 {
            ((cfg.epochs - first.min(cfg.epochs)) / (schedule.len() - 1)).max(1)
        } else {
            0
        };

        let mut best: Option<(f64, Vec<f64>)> = None;
        for trial in 0..cfg.n_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial as u64);
            let mut theta: Vec<f64> = (0..shape.n_params())
                .map(|_| rng.random_range(-cfg.init_range..cfg.init_range))
                .collect();
            for (stage, &eps) in schedule.iter().enumerate() {
                let opts = LbfgsOptions {
                    max_iter: if stage == 0 { first } else { rest },
                    memory: 10,
                    rel_tol: 1e-12,
                    grad_tol: 1e-12,
                };
                let objective = |t: &[f64], g: &mut [f64]| {
                    smoothed_loss_and_grad(shape, t, &xs, &ys, alpha, eps, g)
                };
                theta = lbfgs(objective, theta, &opts).x;
            }
            let mut act = vec![0.0; shape.hidden];
            let loss = (0..n)
                .map(|i| pinball_unchecked(shape.forward(&theta, xs.row(i), &mut act), ys[i], alpha))
                .sum::<f64>()
                / n as f64;
            if best.as_ref().is_none_or(|b| loss < b.0) {
                best = Some((loss, theta));
            }
        }
        let (loss, params) = best.expect("at least one trial");
        if params.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite);
        }
        Ok(QrnnModel {
            alpha,
            hidden_width: cfg.hidden_width,
            params,
            input_standardization: std,
            target_center: center,
            target_scale: scale,
            config: *cfg,
            train_loss: loss * scale,
        })
    }

    fn shape(&self) -> NetShape {
        NetShape {
            inputs: self.input_standardization.mean.len(),
            hidden: self.hidden_width,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, FitError> {
        let shape = self.shape();
        if features.len() != shape.inputs {
            return Err(FitError::FeatureLength {
                expected: shape.inputs,
                got: features.len(),
            });
        }
        let row: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(j, &v)| self.input_standardization.apply(j, v))
            .collect();
        let mut act = vec![0.0; shape.hidden];
        Ok(self.target_center + self.target_scale * shape.forward(&self.params, &row, &mut act))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>, FitError> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn fit_qrnn(train: &Dataset, alpha: f64, cfg: &QrnnConfig) -> Result<QrnnModel, FitError> {
    QrnnModel::fit(&train.features(), &train.targets(), alpha, cfg)
}

pub fn predict_qrnn(model: &QrnnModel, features: &[f64]) -> Result<f64, FitError> {
    model.predict(features)
}
