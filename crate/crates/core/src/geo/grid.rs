use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::point::{haversine_m, GeoPoint};
use super::GeoError;
use crate::data::YearMonth;

/// Time stamp of one grid slice: monthly when `day` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeKey {
    pub year: i32,
    pub month: u8,
    pub day: Option<u8>,
}

impl TimeKey {
    pub fn monthly(year: i32, month: u8) -> Self {
        TimeKey {
            year,
            month,
            day: None,
        }
    }

    pub fn daily(year: i32, month: u8, day: u8) -> Self {
        TimeKey {
            year,
            month,
            day: Some(day),
        }
    }

    pub fn year_month(&self) -> YearMonth {
        YearMonth {
            year: self.year,
            month: self.month,
        }
    }
}

/// A gridded precipitation product: values indexed `[time, lat, lon]` in mm,
/// with `NaN` marking missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    source_tag: String,
    lat_axis: Vec<f64>,
    lon_axis: Vec<f64>,
    time_axis: Vec<TimeKey>,
    values: Vec<f64>,
}

/// One of the closest grid nodes to a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNeighbor {
    pub lat_idx: usize,
    pub lon_idx: usize,
    pub distance_m: f64,
}

fn strictly_increasing(axis: &[f64]) -> bool {
    axis.iter().all(|v| v.is_finite()) && axis.windows(2).all(|w| w[0] < w[1])
}

impl GridField {
    pub fn new(
        source_tag: impl Into<String>,
        lat_axis: Vec<f64>,
        lon_axis: Vec<f64>,
        time_axis: Vec<TimeKey>,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        if !strictly_increasing(&lat_axis) || !strictly_increasing(&lon_axis) {
            return Err(GeoError::InvalidGrid("axes must be strictly increasing".into()));
        }
        if !time_axis.windows(2).all(|w| w[0] < w[1]) {
            return Err(GeoError::InvalidGrid("time axis must be strictly increasing".into()));
        }
        let expected = time_axis.len() * lat_axis.len() * lon_axis.len();
        if values.len() != expected {
            return Err(GeoError::InvalidGrid(format!(
                "expected {expected} values for {}x{}x{}, got {}",
                time_axis.len(),
                lat_axis.len(),
                lon_axis.len(),
                values.len()
            )));
        }
        let daily = time_axis.first().map(|t| t.day.is_some());
        if time_axis.iter().any(|t| Some(t.day.is_some()) != daily) {
            return Err(GeoError::InvalidGrid("mixed daily and monthly time stamps".into()));
        }
        Ok(GridField {
            source_tag: source_tag.into(),
            lat_axis,
            lon_axis,
            time_axis,
            values,
        })
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn lat_axis(&self) -> &[f64] {
        &self.lat_axis
    }

    pub fn lon_axis(&self) -> &[f64] {
        &self.lon_axis
    }

    pub fn time_axis(&self) -> &[TimeKey] {
        &self.time_axis
    }

    pub fn is_daily(&self) -> bool {
        self.time_axis.first().is_some_and(|t| t.day.is_some())
    }

    pub fn n_nodes(&self) -> usize {
        self.lat_axis.len() * self.lon_axis.len()
    }

    /// Value at `(t, lat_idx, lon_idx)`, `None` when missing.
    pub fn value(&self, t: usize, lat_idx: usize, lon_idx: usize) -> Option<f64> {
        let v = self.values[self.offset(t, lat_idx, lon_idx)];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    pub fn time_position(&self, key: TimeKey) -> Option<usize> {
        self.time_axis.binary_search(&key).ok()
    }

    fn offset(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.lat_axis.len() + i) * self.lon_axis.len() + j
    }

    fn node_point(&self, i: usize, j: usize) -> Result<GeoPoint, GeoError> {
        GeoPoint::new(self.lat_axis[i], self.lon_axis[j])
    }
}

/// The `k` grid nodes closest to `p`, ascending by distance with ties broken
/// by `(lat_idx, lon_idx)`.
pub fn nearest_grid_points(
    p: GeoPoint,
    g: &GridField,
    k: usize,
) -> Result<Vec<GridNeighbor>, GeoError> {
    if g.n_nodes() < k {
        return Err(GeoError::InsufficientGrid {
            needed: k,
            available: g.n_nodes(),
        });
    }
    let order = |a: &GridNeighbor, b: &GridNeighbor| {
        a.distance_m
            .total_cmp(&b.distance_m)
            .then(a.lat_idx.cmp(&b.lat_idx))
            .then(a.lon_idx.cmp(&b.lon_idx))
    };
    // bounded insertion keeps the best k without sorting every node
    let mut best: Vec<GridNeighbor> = Vec::with_capacity(k + 1);
    for i in 0..g.lat_axis.len() {
        for j in 0..g.lon_axis.len() {
            let cand = GridNeighbor {
                lat_idx: i,
                lon_idx: j,
                distance_m: haversine_m(p, g.node_point(i, j)?),
            };
            if best.len() == k && order(&cand, &best[k - 1]) != Ordering::Less {
                continue;
            }
            let pos = best.partition_point(|b| order(b, &cand) == Ordering::Less);
            best.insert(pos, cand);
            best.truncate(k);
        }
    }
    Ok(best)
}

/// Bracketing interval and fractional weight of `t` on `axis`.
fn bracket(axis: &[f64], t: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n == 0 || !t.is_finite() || t < axis[0] || t > axis[n - 1] {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let hi = axis.partition_point(|&a| a <= t).clamp(1, n - 1);
    let lo = hi - 1;
    if t == axis[lo] {
        return Some((lo, 0.0));
    }
    if t == axis[hi] {
        return Some((lo, 1.0));
    }
    Some((lo, (t - axis[lo]) / (axis[hi] - axis[lo])))
}

/// Bilinear interpolation of every time slice onto new axes.
///
/// Only corners with nonzero weight contribute, so a target that falls on a
/// source node reproduces it exactly even if neighbouring nodes are missing.
pub fn regrid_bilinear(
    g: &GridField,
    target_lat: &[f64],
    target_lon: &[f64],
) -> Result<GridField, GeoError> {
    let lat_b: Vec<(usize, f64)> = target_lat
        .iter()
        .map(|&t| bracket(&g.lat_axis, t).ok_or(GeoError::Extrapolation { coord: t }))
        .collect::<Result<_, _>>()?;
    let lon_b: Vec<(usize, f64)> = target_lon
        .iter()
        .map(|&t| bracket(&g.lon_axis, t).ok_or(GeoError::Extrapolation { coord: t }))
        .collect::<Result<_, _>>()?;

    let (nt, nlat, nlon) = (g.time_axis.len(), target_lat.len(), target_lon.len());
    let mut values = Vec::with_capacity(nt * nlat * nlon);
    for t in 0..nt {
        for &(i0, wy) in &lat_b {
            for &(j0, wx) in &lon_b {
                values.push(interpolate_cell(g, t, i0, wy, j0, wx));
            }
        }
    }
    GridField::new(
        g.source_tag.clone(),
        target_lat.to_vec(),
        target_lon.to_vec(),
        g.time_axis.clone(),
        values,
    )
}

fn interpolate_cell(g: &GridField, t: usize, i0: usize, wy: f64, j0: usize, wx: f64) -> f64 {
    let corners = [
        (i0, j0, (1.0 - wy) * (1.0 - wx)),
        (i0, j0 + 1, (1.0 - wy) * wx),
        (i0 + 1, j0, wy * (1.0 - wx)),
        (i0 + 1, j0 + 1, wy * wx),
    ];
    let mut acc = 0.0;
    for (i, j, w) in corners {
        if w == 0.0 {
            continue;
        }
        match g.value(t, i, j) {
            Some(v) => acc += w * v,
            None => return f64::NAN,
        }
    }
    acc
}

/// Sums daily slices into monthly totals. A month with any missing day at a
/// node is missing at that node.
pub fn aggregate_daily_to_monthly(g: &GridField) -> Result<GridField, GeoError> {
    if !g.is_daily() {
        return Err(GeoError::NotDaily);
    }
    let mut months: BTreeMap<YearMonth, Vec<usize>> = BTreeMap::new();
    for (t, key) in g.time_axis.iter().enumerate() {
        months.entry(key.year_month()).or_default().push(t);
    }
    let nodes = g.n_nodes();
    let mut values = Vec::with_capacity(months.len() * nodes);
    for slices in months.values() {
        for node in 0..nodes {
            let mut sum = 0.0;
            for &t in slices {
                sum += g.values[t * nodes + node];
            }
            values.push(sum);
        }
    }
    let time_axis = months
        .keys()
        .map(|ym| TimeKey::monthly(ym.year, ym.month))
        .collect();
    GridField::new(
        g.source_tag.clone(),
        g.lat_axis.clone(),
        g.lon_axis.clone(),
        time_axis,
        values,
    )
}
