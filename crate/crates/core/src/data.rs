//! Regression samples, datasets and a minimal row-major feature matrix.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of predictors carried by every sample.
pub const N_PREDICTORS: usize = 17;

/// Predictor names in storage order: elevation, the four sorted distances to
/// field A and field B nodes, then the precipitation at those nodes.
pub const PREDICTOR_NAMES: [&str; N_PREDICTORS] = [
    "elevation_m",
    "dist1_a_m",
    "dist2_a_m",
    "dist3_a_m",
    "dist4_a_m",
    "dist1_b_m",
    "dist2_b_m",
    "dist3_b_m",
    "dist4_b_m",
    "precip1_a_mm",
    "precip2_a_mm",
    "precip3_a_mm",
    "precip4_a_mm",
    "precip1_b_mm",
    "precip2_b_mm",
    "precip3_b_mm",
    "precip4_b_mm",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Calendar month a sample refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

/// One (station, month) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub station_id: String,
    pub time: YearMonth,
    pub target_mm: f64,
    pub predictors: [f64; N_PREDICTORS],
}

/// Flat on-disk form of a [`Sample`]: every predictor under its own name.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    station_id: String,
    year: i32,
    month: u8,
    target_mm: f64,
    elevation_m: f64,
    dist1_a_m: f64,
    dist2_a_m: f64,
    dist3_a_m: f64,
    dist4_a_m: f64,
    dist1_b_m: f64,
    dist2_b_m: f64,
    dist3_b_m: f64,
    dist4_b_m: f64,
    precip1_a_mm: f64,
    precip2_a_mm: f64,
    precip3_a_mm: f64,
    precip4_a_mm: f64,
    precip1_b_mm: f64,
    precip2_b_mm: f64,
    precip3_b_mm: f64,
    precip4_b_mm: f64,
}

impl From<&Sample> for SampleLine {
    fn from(s: &Sample) -> Self {
        let p = &s.predictors;
        SampleLine {
            station_id: s.station_id.clone(),
            year: s.time.year,
            month: s.time.month,
            target_mm: s.target_mm,
            elevation_m: p[0],
            dist1_a_m: p[1],
            dist2_a_m: p[2],
            dist3_a_m: p[3],
            dist4_a_m: p[4],
            dist1_b_m: p[5],
            dist2_b_m: p[6],
            dist3_b_m: p[7],
            dist4_b_m: p[8],
            precip1_a_mm: p[9],
            precip2_a_mm: p[10],
            precip3_a_mm: p[11],
            precip4_a_mm: p[12],
            precip1_b_mm: p[13],
            precip2_b_mm: p[14],
            precip3_b_mm: p[15],
            precip4_b_mm: p[16],
        }
    }
}

impl From<SampleLine> for Sample {
    fn from(l: SampleLine) -> Self {
        Sample {
            station_id: l.station_id,
            time: YearMonth { year: l.year, month: l.month },
            target_mm: l.target_mm,
            predictors: [
                l.elevation_m,
                l.dist1_a_m,
                l.dist2_a_m,
                l.dist3_a_m,
                l.dist4_a_m,
                l.dist1_b_m,
                l.dist2_b_m,
                l.dist3_b_m,
                l.dist4_b_m,
                l.precip1_a_mm,
                l.precip2_a_mm,
                l.precip3_a_mm,
                l.precip4_a_mm,
                l.precip1_b_mm,
                l.precip2_b_mm,
                l.precip3_b_mm,
                l.precip4_b_mm,
            ],
        }
    }
}

/// An ordered collection of samples with a per-station index.
///
/// Stations are indexed in order of first appearance; the index lists each
/// sample position exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    station_order: Vec<String>,
    station_index: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        let mut station_order = Vec::new();
        let mut station_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let entry = station_index.entry(s.station_id.clone()).or_insert_with(|| {
                station_order.push(s.station_id.clone());
                Vec::new()
            });
            entry.push(i);
        }
        Dataset {
            samples,
            station_order,
            station_index,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn station_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.station_index
    }

    /// Station ids in order of first appearance.
    pub fn stations(&self) -> &[String] {
        &self.station_order
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target_mm).collect()
    }

    pub fn features(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.samples.len() * N_PREDICTORS);
        for s in &self.samples {
            data.extend_from_slice(&s.predictors);
        }
        Matrix::new(data, self.samples.len(), N_PREDICTORS)
    }

    /// Subset in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        for s in &self.samples {
            let line = serde_json::to_string(&SampleLine::from(s))
                .map_err(|e| DataError::Invalid(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dataset, DataError> {
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SampleLine = serde_json::from_str(&line).map_err(|e| DataError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            samples.push(parsed.into());
        }
        Ok(Dataset::new(samples))
    }
}

/// Dense row-major matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match shape");
        Matrix { data, rows, cols }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::new(data, rows.len(), cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(data, indices.len(), self.cols)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
