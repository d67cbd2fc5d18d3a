//! Gauge/grid matching: read CSV inputs, find neighbours, regrid, and build
//! one predictor vector per (station, month).

use precip_uq::geo::{
    build_samples, haversine_m, nearest_grid_points, read_gauges, read_grid, regrid_bilinear, GeoPoint,
};
use precip_uq::PREDICTOR_NAMES;

const GAUGES: &str = "station_id,lat,lon,elevation_m,year,month,precip_mm
usc001,40.3,-105.2,1650,2015,1,12.4
usc001,40.3,-105.2,1650,2015,2,
usc002,41.1,-104.6,1880,2015,1,8.0
";

fn grid(values: [f64; 6]) -> String {
    let mut s = String::from("lat,lon,year,month,value\n");
    for month in 1..=2 {
        for (i, lat) in [40.0, 41.5].iter().enumerate() {
            for (j, lon) in [-106.0, -105.0, -104.0].iter().enumerate() {
                s += &format!("{lat},{lon},2015,{month},{}\n", values[i * 3 + j] * month as f64);
            }
        }
    }
    s
}

fn main() {
    let gauges = read_gauges(GAUGES.as_bytes()).unwrap();
    let a = read_grid(grid([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).as_bytes(), "a").unwrap();
    let b = read_grid(grid([0.5, 1.5, 2.5, 3.5, 4.5, 5.5]).as_bytes(), "b").unwrap();

    let denver = GeoPoint::new(39.74, -104.99).unwrap();
    let boulder = GeoPoint::new(40.01, -105.27).unwrap();
    println!("Denver-Boulder: {:.1} km", haversine_m(denver, boulder) / 1000.0);
    for n in nearest_grid_points(gauges[0].location, &a, 4).unwrap() {
        println!("  node ({}, {}) at {:.1} km", n.lat_idx, n.lon_idx, n.distance_m / 1000.0);
    }

    let fine = regrid_bilinear(&b, &[40.0, 40.75, 41.5], &[-106.0, -105.5, -105.0, -104.5, -104.0]).unwrap();
    println!("regridded b: {} x {} nodes", fine.lat_axis().len(), fine.lon_axis().len());

    let built = build_samples(&gauges, &a, &b).unwrap();
    for s in built.dataset.samples() {
        println!("{} {:?}: target {} mm", s.station_id, s.time, s.target_mm);
        for (name, v) in PREDICTOR_NAMES.iter().zip(s.predictors.iter()).take(5) {
            println!("    {name:<16} {v:.3}");
        }
    }
    for skip in &built.skips {
        println!("skipped {} {}-{:02}: {}", skip.station_id, skip.year, skip.month, skip.reason);
    }
}
