use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use precip_uq::cli::format_percent;

fn bin(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_precip-uq"));
    cmd.args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A 2x2 monthly grid over (0..1, 0..1) for January and February 2001.
fn grid_csv(offset: f64) -> String {
    let mut s = String::from("lat,lon,year,month,value\n");
    for month in 1..=2 {
        for (i, lat) in [0.0, 1.0].iter().enumerate() {
            for (j, lon) in [0.0, 1.0].iter().enumerate() {
                s += &format!("{lat},{lon},2001,{month},{}\n", offset + (i * 2 + j) as f64 + month as f64);
            }
        }
    }
    s
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(gauges: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("gauges.csv"), gauges).unwrap();
        std::fs::write(dir.path().join("a.csv"), grid_csv(0.0)).unwrap();
        std::fs::write(dir.path().join("b.csv"), grid_csv(10.0)).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn ingest(&self) -> Output {
        let out = self.path("data");
        bin(
            &["ingest"],
            &[
                Path::new("--gauges"),
                &self.path("gauges.csv"),
                Path::new("--grid-a"),
                &self.path("a.csv"),
                Path::new("--grid-b"),
                &self.path("b.csv"),
                Path::new("--out"),
                &out,
            ],
        )
    }
}

const HEADER: &str = "station_id,lat,lon,elevation_m,year,month,precip_mm\n";

#[test]
fn ingest_builds_one_sample_per_station_month() {
    let f = Fixture::new(&format!("{HEADER}g1,0.3,0.4,120,2001,1,55.5\ng1,0.3,0.4,120,2001,2,60\n"));
    let o = f.ingest();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(f.path("data/dataset.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_samples"], 2);
}

#[test]
fn negative_precipitation_is_an_input_error() {
    let f = Fixture::new(&format!("{HEADER}g1,0.3,0.4,120,2001,1,-1\n"));
    let o = f.ingest();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("negative"), "{err}");
}

#[test]
fn months_outside_the_grids_give_no_samples() {
    let f = Fixture::new(&format!("{HEADER}g1,0.3,0.4,120,2009,7,10\n"));
    assert_eq!(f.ingest().status.code(), Some(3));
}

#[test]
fn missing_benchmark_learner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"version": 1, "benchmark": "absent", "learners": [{"name": "linear_qr", "model": {"kind": "linear_qr"}}]}"#,
    )
    .unwrap();
    let o = bin(&["benchmark", "--synth", "hetero", "--n", "200", "--config"], &[&cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn report_without_a_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["report", "--out"], &[dir.path()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"version": 1, "n_folds": 3}"#).unwrap();
    let o = bin(&["benchmark", "--synth", "hetero", "--n", "200", "--config"], &[&cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_then_report_with_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{
  "version": 1,
  "folds": 3,
  "learners": [
    {"name": "linear_qr", "model": {"kind": "linear_qr"}},
    {"name": "boost_levelwise", "model": {"kind": "levelwise_boost", "boost": {"n_iterations": 30}}}
  ],
  "importance": {"n_iterations": 20, "min_data_in_leaf": 20}
}"#,
    )
    .unwrap();
    let out = dir.path().join("report");
    let o = bin(&["benchmark", "--synth", "hetero", "--n", "600", "--seed", "5", "--config"], &[&cfg, Path::new("--out"), &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ranking = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(ranking.contains("boost_levelwise") && ranking.contains("linear_qr"), "{ranking}");
    let before = std::fs::read(out.join("report.json")).unwrap();

    let o = bin(&["report", "--plots", "--out"], &[&out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("600 samples"), "{text}");

    // Importance table lists all seventeen predictors with ranks 1..=17.
    let start = text.find("predictor rank by total gain").expect("importance table");
    let rows: Vec<&str> = text[start..].lines().skip(2).take(17).collect();
    assert_eq!(rows.len(), 17);
    let mut first_level: Vec<usize> = rows
        .iter()
        .map(|r| r.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    first_level.sort_unstable();
    assert_eq!(first_level, (1..=17).collect::<Vec<_>>());

    for svg in ["coverage.svg", "skill_heatmap.svg", "skill_bars.svg"] {
        let body = std::fs::read_to_string(out.join(svg)).unwrap();
        assert!(body.starts_with("<svg") && body.trim_end().ends_with("</svg>"), "{svg}");
    }
    // Re-rendering leaves the report untouched.
    assert_eq!(std::fs::read(out.join("report.json")).unwrap(), before);
}

#[test]
fn synth_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn");
    let o = bin(&["synth", "--synth", "single_signal", "--n", "250", "--out"], &[&out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("dataset.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 250);
}

#[test]
fn percent_formatting() {
    assert_eq!(format_percent(0.1110), "11.10%");
    assert_eq!(format_percent(0.0173), "1.73%");
}
