use std::fs;
use std::path::Path;

use super::harness::EvaluationReport;
use super::BenchError;

/// Files written by [`write_report`], besides `timings.csv`.
pub const REPORT_FILES: [&str; 6] = [
    "report.json",
    "coverage.csv",
    "skills_by_level.csv",
    "scoring_rule_skills.csv",
    "station_skills.csv",
    "importance.csv",
];

/// Writes `report.json`, the flat CSV tables and `timings.csv` into `dir`.
///
/// Wall-clock timings go only to `timings.csv`, so `report.json` is a pure
/// function of the configuration and the data.
pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("coverage.csv"), report.scores.coverage_csv())?;
    fs::write(dir.join("skills_by_level.csv"), report.scores.skills_by_level_csv())?;
    fs::write(dir.join("scoring_rule_skills.csv"), report.scores.scoring_rule_csv())?;
    fs::write(dir.join("station_skills.csv"), report.scores.station_skills_csv())?;
    let importance = match &report.importance {
        Some(imp) => imp.to_csv(),
        None => "level,predictor,total_gain,rank\n".to_string(),
    };
    fs::write(dir.join("importance.csv"), importance)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["learner", "fold", "level", "seconds"]).expect("in-memory csv write");
    for t in &report.timings {
        w.write_record([
            t.learner.clone(),
            t.fold.to_string(),
            t.level.map(|a| a.to_string()).unwrap_or_else(|| "all".into()),
            format!("{:.4}", t.seconds),
        ])
        .expect("in-memory csv write");
    }
    fs::write(dir.join("timings.csv"), w.into_inner().expect("in-memory csv flush"))?;
    Ok(())
}

/// Reads `report.json` back from a report directory.
pub fn read_report(dir: &Path) -> Result<EvaluationReport, BenchError> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}
