use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::BenchError;
use crate::data::{Dataset, Matrix, Sample, YearMonth, N_PREDICTORS};
use crate::scoring::{LevelGrid, QuantilePredictions};

/// Known conditional laws over 17 `Uniform(0, 1)` predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `y = 10 + 5 x1 + 3 sin(2 pi x2) + (1 + 2 x3) e`.
    Hetero,
    /// `y = 10 + 40 x1 + e`; the other 16 predictors are pure noise.
    SingleSignal,
}

impl ScenarioKind {
    pub fn from_name(name: &str) -> Result<Self, BenchError> {
        match name {
            "hetero" => Ok(ScenarioKind::Hetero),
            "single_signal" => Ok(ScenarioKind::SingleSignal),
            _ => Err(BenchError::Config(format!(
                "unknown scenario {name:?} (expected hetero or single_signal)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Hetero => "hetero",
            ScenarioKind::SingleSignal => "single_signal",
        }
    }

    /// Conditional location `m(x)`.
    pub fn location(&self, x: &[f64]) -> f64 {
        match self {
            ScenarioKind::Hetero => {
                10.0 + 5.0 * x[0] + 3.0 * (2.0 * std::f64::consts::PI * x[1]).sin()
            }
            ScenarioKind::SingleSignal => 10.0 + 40.0 * x[0],
        }
    }

    /// Conditional spread `s(x) > 0`.
    pub fn spread(&self, x: &[f64]) -> f64 {
        match self {
            ScenarioKind::Hetero => 1.0 + 2.0 * x[2],
            ScenarioKind::SingleSignal => 1.0,
        }
    }

    /// True conditional `alpha`-quantile `m(x) + s(x) z_alpha`.
    pub fn quantile(&self, x: &[f64], alpha: f64) -> f64 {
        self.location(x) + self.spread(x) * normal_quantile(alpha)
    }

    pub fn predict(&self, x: &Matrix, grid: &LevelGrid) -> QuantilePredictions {
        let z: Vec<f64> = grid.levels().iter().map(|&a| normal_quantile(a)).collect();
        let mut values = Vec::with_capacity(x.rows() * grid.len());
        for i in 0..x.rows() {
            let (m, s) = (self.location(x.row(i)), self.spread(x.row(i)));
            values.extend(z.iter().map(|z| m + s * z));
        }
        QuantilePredictions::new(values, grid.clone()).expect("shape matches grid")
    }
}

/// Standard normal quantile, exactly antisymmetric about one half.
pub fn normal_quantile(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "level {alpha} outside (0, 1)");
    if alpha == 0.5 {
        return 0.0;
    }
    let n = Normal::standard();
    if alpha > 0.5 {
        -n.inverse_cdf(1.0 - alpha)
    } else {
        n.inverse_cdf(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
    /// Consecutive samples per synthetic station.
    pub station_block: usize,
}

impl SyntheticScenario {
    pub fn new(kind: ScenarioKind, n: usize, seed: u64) -> Self {
        SyntheticScenario {
            kind,
            n,
            seed,
            station_block: 100,
        }
    }
}

/// Seeded draws from the scenario law. Stations are filled in blocks of
/// consecutive samples, each a run of consecutive months.
pub fn generate_synthetic(s: &SyntheticScenario) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let block = s.station_block.max(1);
    let samples = (0..s.n)
        .map(|i| {
            let mut predictors = [0.0; N_PREDICTORS];
            for v in predictors.iter_mut() {
                *v = rng.random::<f64>();
            }
            let e: f64 = rng.sample(StandardNormal);
            let month_index = (i % block) as i32;
            Sample {
                station_id: format!("syn{:05}", i / block),
                time: YearMonth {
                    year: 2001 + month_index / 12,
                    month: (month_index % 12) as u8 + 1,
                },
                target_mm: s.kind.location(&predictors) + s.kind.spread(&predictors) * e,
                predictors,
            }
        })
        .collect();
    Dataset::new(samples)
}
