//! Readers for the gauge and long-form grid CSV layouts.
//!
//! Gauges: `station_id,lat,lon,elevation_m,year,month,precip_mm`.
//! Grids: `lat,lon,year,month[,day],value`. Empty fields mean missing.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use super::grid::{GridField, TimeKey};
use super::point::GeoPoint;
use super::samples::GaugeRecord;
use super::GeoError;

const GAUGE_HEADER: [&str; 7] = [
    "station_id",
    "lat",
    "lon",
    "elevation_m",
    "year",
    "month",
    "precip_mm",
];

fn malformed(line: u64, msg: impl Into<String>) -> GeoError {
    GeoError::Malformed {
        line,
        msg: msg.into(),
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_err(e: csv::Error) -> GeoError {
    let line = e.position().map_or(0, |p| p.line());
    malformed(line, e.to_string())
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>, GeoError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| malformed(line_of(rec), format!("{name}: not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(malformed(line_of(rec), format!("{name}: not finite")));
    }
    Ok(Some(v))
}

fn require_f64(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, GeoError> {
    parse_f64(rec, idx, name)?.ok_or_else(|| malformed(line_of(rec), format!("{name}: missing")))
}

fn parse_int<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, GeoError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse()
        .map_err(|_| malformed(line_of(rec), format!("{name}: not an integer: {raw:?}")))
}

fn parse_month(rec: &csv::StringRecord, idx: usize) -> Result<u8, GeoError> {
    let m: u8 = parse_int(rec, idx, "month")?;
    if !(1..=12).contains(&m) {
        return Err(malformed(line_of(rec), format!("month out of range: {m}")));
    }
    Ok(m)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), GeoError> {
    let got: Vec<&str> = found.iter().map(str::trim).collect();
    if got != expected {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub fn read_gauges<R: Read>(r: R) -> Result<Vec<GaugeRecord>, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(rdr.headers().map_err(csv_err)?, &GAUGE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let station_id = rec.get(0).unwrap_or("").trim().to_string();
        if station_id.is_empty() {
            return Err(malformed(line, "station_id: missing"));
        }
        let lat = require_f64(&rec, 1, "lat")?;
        let lon = require_f64(&rec, 2, "lon")?;
        let location = GeoPoint::new(lat, lon).map_err(|e| malformed(line, e.to_string()))?;
        let elevation_m = parse_f64(&rec, 3, "elevation_m")?;
        let year = parse_int(&rec, 4, "year")?;
        let month = parse_month(&rec, 5)?;
        let precip_mm = parse_f64(&rec, 6, "precip_mm")?;
        if precip_mm.is_some_and(|p| p < 0.0) {
            return Err(malformed(line, "precip_mm: negative precipitation"));
        }
        out.push(GaugeRecord {
            station_id,
            location,
            elevation_m,
            year,
            month,
            precip_mm,
        });
    }
    Ok(out)
}

/// Reads a long-form grid file. Axes are the sorted distinct coordinates;
/// nodes without a row for some time stamp are missing there.
pub fn read_grid<R: Read>(r: R, source_tag: &str) -> Result<GridField, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let daily = header.len() == 6;
    let expected: &[&str] = if daily {
        &["lat", "lon", "year", "month", "day", "value"]
    } else {
        &["lat", "lon", "year", "month", "value"]
    };
    check_header(&header, expected)?;
    let value_col = expected.len() - 1;

    let mut rows: Vec<(f64, f64, TimeKey, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let lat = require_f64(&rec, 0, "lat")?;
        let lon = require_f64(&rec, 1, "lon")?;
        let year = parse_int(&rec, 2, "year")?;
        let month = parse_month(&rec, 3)?;
        let key = if daily {
            let day: u8 = parse_int(&rec, 4, "day")?;
            if !(1..=31).contains(&day) {
                return Err(malformed(line_of(&rec), format!("day out of range: {day}")));
            }
            TimeKey::daily(year, month, day)
        } else {
            TimeKey::monthly(year, month)
        };
        let value = parse_f64(&rec, value_col, "value")?.unwrap_or(f64::NAN);
        if value < 0.0 {
            return Err(malformed(line_of(&rec), "value: negative precipitation"));
        }
        rows.push((lat, lon, key, value));
    }

    let axis = |pick: fn(&(f64, f64, TimeKey, f64)) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = rows.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let lat_axis = axis(|r| r.0);
    let lon_axis = axis(|r| r.1);
    let time_axis: Vec<TimeKey> = rows
        .iter()
        .map(|r| r.2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let t_pos: HashMap<TimeKey, usize> = time_axis.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let (nlat, nlon) = (lat_axis.len(), lon_axis.len());
    let mut values = vec![f64::NAN; time_axis.len() * nlat * nlon];
    let mut filled = vec![false; values.len()];
    for (lat, lon, key, value) in rows {
        let i = lat_axis.partition_point(|&a| a < lat);
        let j = lon_axis.partition_point(|&a| a < lon);
        let off = (t_pos[&key] * nlat + i) * nlon + j;
        if filled[off] {
            return Err(GeoError::InvalidGrid(format!(
                "{source_tag}: duplicate row for ({lat}, {lon}) at {}-{:02}",
                key.year, key.month
            )));
        }
        filled[off] = true;
        values[off] = value;
    }
    GridField::new(source_tag, lat_axis, lon_axis, time_axis, values)
}
