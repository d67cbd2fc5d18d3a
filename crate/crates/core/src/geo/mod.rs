//! Gauge and satellite-grid ingestion: great-circle matching, bilinear
//! regridding, daily-to-monthly aggregation and sample assembly.

mod csv_io;
mod grid;
mod point;
mod samples;

use thiserror::Error;

pub use csv_io::{read_gauges, read_grid};
pub use grid::{
    aggregate_daily_to_monthly, nearest_grid_points, regrid_bilinear, GridField, GridNeighbor,
    TimeKey,
};
pub use point::{haversine_m, GeoPoint, EARTH_RADIUS_M};
pub use samples::{build_samples, BuildOutput, GaugeRecord, SkipRecord, NEIGHBORS_PER_FIELD};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid point ({lat}, {lon})")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("insufficient grid: need {needed} nodes, have {available}")]
    InsufficientGrid { needed: usize, available: usize },
    #[error("extrapolation requested at coordinate {coord}")]
    Extrapolation { coord: f64 },
    #[error("input is not daily")]
    NotDaily,
    #[error("station {0} has no elevation")]
    MissingElevation(String),
    #[error("duplicate gauge record {station_id} {year}-{month:02}")]
    DuplicateGauge {
        station_id: String,
        year: i32,
        month: u8,
    },
    #[error("no samples could be assembled")]
    NoSamples,
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
}
