use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::grid::{nearest_grid_points, GridField, GridNeighbor, TimeKey};
use super::point::GeoPoint;
use super::GeoError;
use crate::data::{Dataset, Sample, YearMonth, N_PREDICTORS};

/// Neighbours taken from each satellite field.
pub const NEIGHBORS_PER_FIELD: usize = 4;

/// A monthly gauge total. Elevation and precipitation may be absent in the
/// raw input; absent elevation is fatal, absent precipitation skips the month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub station_id: String,
    pub location: GeoPoint,
    pub elevation_m: Option<f64>,
    pub year: i32,
    pub month: u8,
    pub precip_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub station_id: String,
    pub year: i32,
    pub month: u8,
    pub reason: String,
}

/// Result of sample assembly: the dataset plus every dropped (station, month).
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub dataset: Dataset,
    pub skips: Vec<SkipRecord>,
}

struct Station<'a> {
    id: &'a str,
    elevation: f64,
    near_a: Vec<GridNeighbor>,
    near_b: Vec<GridNeighbor>,
    months: Vec<&'a GaugeRecord>,
}

/// Assembles one sample per (station, month) with the target and all sixteen
/// satellite predictors present.
///
/// Stations keep their order of first appearance and months are sorted within
/// each station. Neighbour distances are computed once per station.
pub fn build_samples(
    gauges: &[GaugeRecord],
    field_a: &GridField,
    field_b: &GridField,
) -> Result<BuildOutput, GeoError> {
    if field_a.is_daily() || field_b.is_daily() {
        return Err(GeoError::InvalidGrid(
            "fields must be monthly; aggregate daily data first".into(),
        ));
    }

    let mut seen = BTreeSet::new();
    let mut order: Vec<&str> = Vec::new();
    let mut by_station: HashMap<&str, Vec<&GaugeRecord>> = HashMap::new();
    for g in gauges {
        if !seen.insert((g.station_id.as_str(), g.year, g.month)) {
            return Err(GeoError::DuplicateGauge {
                station_id: g.station_id.clone(),
                year: g.year,
                month: g.month,
            });
        }
        by_station
            .entry(g.station_id.as_str())
            .or_insert_with(|| {
                order.push(g.station_id.as_str());
                Vec::new()
            })
            .push(g);
    }

    let mut stations = Vec::with_capacity(order.len());
    for id in order {
        let mut months = by_station.remove(id).unwrap_or_default();
        months.sort_by_key(|r| (r.year, r.month));
        let first = months[0];
        let elevation = first
            .elevation_m
            .filter(|e| e.is_finite())
            .ok_or_else(|| GeoError::MissingElevation(id.to_string()))?;
        stations.push(Station {
            id,
            elevation,
            near_a: nearest_grid_points(first.location, field_a, NEIGHBORS_PER_FIELD)?,
            near_b: nearest_grid_points(first.location, field_b, NEIGHBORS_PER_FIELD)?,
            months,
        });
    }

    let mut samples = Vec::new();
    let mut skips = Vec::new();
    for st in &stations {
        for rec in &st.months {
            match assemble(st, rec, field_a, field_b) {
                Ok(s) => samples.push(s),
                Err(reason) => skips.push(SkipRecord {
                    station_id: st.id.to_string(),
                    year: rec.year,
                    month: rec.month,
                    reason,
                }),
            }
        }
    }
    if samples.is_empty() {
        return Err(GeoError::NoSamples);
    }
    Ok(BuildOutput {
        dataset: Dataset::new(samples),
        skips,
    })
}

fn field_values(
    field: &GridField,
    near: &[GridNeighbor],
    key: TimeKey,
) -> Result<[f64; NEIGHBORS_PER_FIELD], String> {
    let tag = field.source_tag();
    let t = field
        .time_position(key)
        .ok_or_else(|| format!("{tag}: month not covered"))?;
    let mut out = [0.0; NEIGHBORS_PER_FIELD];
    for (slot, n) in out.iter_mut().zip(near) {
        *slot = field
            .value(t, n.lat_idx, n.lon_idx)
            .ok_or_else(|| format!("{tag}: missing value at node ({}, {})", n.lat_idx, n.lon_idx))?;
    }
    Ok(out)
}

fn assemble(
    st: &Station<'_>,
    rec: &GaugeRecord,
    field_a: &GridField,
    field_b: &GridField,
) -> Result<Sample, String> {
    let target = match rec.precip_mm {
        Some(v) if v.is_finite() => v,
        _ => return Err("missing gauge precipitation".to_string()),
    };
    let key = TimeKey::monthly(rec.year, rec.month);
    let pr_a = field_values(field_a, &st.near_a, key)?;
    let pr_b = field_values(field_b, &st.near_b, key)?;

    let mut predictors = [0.0; N_PREDICTORS];
    predictors[0] = st.elevation;
    for k in 0..NEIGHBORS_PER_FIELD {
        predictors[1 + k] = st.near_a[k].distance_m;
        predictors[5 + k] = st.near_b[k].distance_m;
        predictors[9 + k] = pr_a[k];
        predictors[13 + k] = pr_b[k];
    }
    Ok(Sample {
        station_id: st.id.to_string(),
        time: YearMonth {
            year: rec.year,
            month: rec.month,
        },
        target_mm: target,
        predictors,
    })
}
