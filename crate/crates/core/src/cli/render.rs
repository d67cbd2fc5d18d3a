use std::fmt::Write;

use crate::bench::{EvaluationReport, ImportanceReport};

/// Skill as a percentage with two decimals: `0.1110` -> `"11.10%"`.
pub fn format_percent(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Integer with space-separated thousands: `91623` -> `"91 623"`.
pub fn format_count(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

fn cell(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "-".to_string(), f)
}

/// Learners ranked by quantile-scoring-rule skill against the benchmark.
pub fn ranking_table(r: &EvaluationReport) -> String {
    let width = r.scores.learners.iter().map(|l| l.learner.len()).max().unwrap_or(7).max(7);
    let mut s = String::new();
    writeln!(s, "scoring-rule skill vs {}", r.scores.benchmark).unwrap();
    writeln!(s, "{:<4}  {:<width$}  {:>8}  {:>8}", "rank", "learner", "skill", "percent").unwrap();
    for (i, (name, skill)) in r.ranking().into_iter().enumerate() {
        writeln!(
            s,
            "{:<4}  {:<width$}  {:>8}  {:>8}",
            i + 1,
            name,
            cell(skill, |v| format!("{v:.4}")),
            cell(skill, format_percent),
        )
        .unwrap();
    }
    s
}

fn level_matrix(
    r: &EvaluationReport,
    title: &str,
    pick: impl Fn(&crate::scoring::LearnerScores, usize) -> Option<f64>,
    fmt: impl Fn(f64) -> String,
) -> String {
    let width = r.scores.learners.iter().map(|l| l.learner.len()).max().unwrap_or(7).max(7);
    let mut s = String::new();
    writeln!(s, "{title}").unwrap();
    write!(s, "{:<width$}", "learner").unwrap();
    for a in r.scores.levels.levels() {
        write!(s, "  {:>8}", a).unwrap();
    }
    s.push('\n');
    for row in &r.scores.learners {
        write!(s, "{:<width$}", row.learner).unwrap();
        for j in 0..r.scores.levels.len() {
            write!(s, "  {:>8}", cell(pick(row, j), &fmt)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn skills_table(r: &EvaluationReport) -> String {
    level_matrix(r, "skill by level", |l, j| l.skill[j], format_percent)
}

pub fn coverage_table(r: &EvaluationReport) -> String {
    level_matrix(r, "coverage by level", |l, j| l.coverage[j], |v| format!("{v:.4}"))
}

/// Predictor ranks, one column per level.
pub fn importance_table(imp: &ImportanceReport) -> String {
    let width = imp.predictors.iter().map(|p| p.len()).max().unwrap_or(9).max(9);
    let mut s = String::new();
    writeln!(s, "predictor rank by total gain").unwrap();
    write!(s, "{:<width$}", "predictor").unwrap();
    for a in &imp.levels {
        write!(s, "  {:>6}", a).unwrap();
    }
    s.push('\n');
    for (j, name) in imp.predictors.iter().enumerate() {
        write!(s, "{:<width$}", name).unwrap();
        for ranks in &imp.ranks {
            write!(s, "  {:>6}", ranks[j]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn render_report(r: &EvaluationReport) -> String {
    let mut s = format!(
        "{} samples, {} folds ({:?})\n\n",
        format_count(r.n_samples),
        r.fold_sizes.len(),
        r.config.fold_granularity
    );
    s += &ranking_table(r);
    s.push('\n');
    s += &skills_table(r);
    s.push('\n');
    s += &coverage_table(r);
    if let Some(imp) = &r.importance {
        s.push('\n');
        s += &importance_table(imp);
    }
    for f in &r.failures {
        let _ = writeln!(s, "\nfailed: {} ({})", f.learner, f.reason);
    }
    s
}
