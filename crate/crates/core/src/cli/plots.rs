//! Static SVG figures: coverage curves, a skill heatmap and skill bars.

use std::fmt::Write;

use crate::bench::EvaluationReport;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Empirical coverage against nominal level, one polyline per learner.
pub fn coverage_svg(r: &EvaluationReport) -> String {
    let (w, h, m) = (520.0, 420.0, 50.0);
    let px = |a: f64| m + a * (w - 2.0 * m - 120.0);
    let py = |c: f64| h - m - c * (h - 2.0 * m);
    let mut s = svg_open(w, h);
    writeln!(s, "<text x=\"{}\" y=\"20\" font-size=\"13\">Coverage</text>", m).unwrap();
    writeln!(s, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>", px(0.0), py(0.0), px(1.0), py(1.0)).unwrap();
    writeln!(s, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/><line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\" stroke=\"black\"/>", px(0.0), py(0.0), px(1.0), py(1.0)).unwrap();
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t}</text>", px(t), py(0.0) + 15.0).unwrap();
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{t}</text>", px(0.0) - 5.0, py(t) + 4.0).unwrap();
    }
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">nominal level</text>", px(0.5), h - 12.0).unwrap();
    let levels = r.scores.levels.levels();
    for (i, row) in r.scores.learners.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = levels
            .iter()
            .zip(&row.coverage)
            .filter_map(|(&a, c)| c.map(|c| format!("{:.2},{:.2}", px(a), py(c))))
            .collect();
        if !pts.is_empty() {
            writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", pts.join(" ")).unwrap();
        }
        let ly = m + 15.0 * i as f64;
        writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/><text x=\"{}\" y=\"{}\">{}</text>", w - 160.0, ly, w - 145.0, ly + 9.0, escape(&row.learner)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn heat_color(v: f64, vmax: f64) -> String {
    let t = (v / vmax).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0 * (1.0 - t), 255.0 * (1.0 - 0.5 * t), 255.0 * (1.0 - t))
    } else {
        (255.0, 255.0 * (1.0 + t), 255.0 * (1.0 + t))
    };
    format!("rgb({},{},{})", r.round(), g.round(), b.round())
}

/// Learner-by-level skill heatmap; green above the benchmark, red below.
pub fn skill_heatmap_svg(r: &EvaluationReport) -> String {
    let levels = r.scores.levels.levels();
    let (cw, ch, left, top) = (56.0, 24.0, 130.0, 50.0);
    let w = left + cw * levels.len() as f64 + 20.0;
    let h = top + ch * r.scores.learners.len() as f64 + 20.0;
    let vmax = r
        .scores
        .learners
        .iter()
        .flat_map(|l| l.skill.iter().flatten())
        .fold(1e-12f64, |m, v| m.max(v.abs()));
    let mut s = svg_open(w, h);
    writeln!(s, "<text x=\"10\" y=\"20\" font-size=\"13\">Skill by level vs {}</text>", escape(&r.scores.benchmark)).unwrap();
    for (j, a) in levels.iter().enumerate() {
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{a}</text>", left + cw * (j as f64 + 0.5), top - 6.0).unwrap();
    }
    for (i, row) in r.scores.learners.iter().enumerate() {
        let y = top + ch * i as f64;
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", left - 6.0, y + 16.0, escape(&row.learner)).unwrap();
        for (j, v) in row.skill.iter().enumerate() {
            let x = left + cw * j as f64;
            let (fill, label) = match v {
                Some(v) => (heat_color(*v, vmax), format!("{:.1}", v * 100.0)),
                None => ("#eeeeee".to_string(), "-".to_string()),
            };
            writeln!(s, "<rect x=\"{x}\" y=\"{y}\" width=\"{cw}\" height=\"{ch}\" fill=\"{fill}\" stroke=\"white\"/><text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>", x + cw / 2.0, y + 16.0).unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars of scoring-rule skill per learner.
pub fn skill_bars_svg(r: &EvaluationReport) -> String {
    let rows = r.ranking();
    let (left, bw, bh, top) = (130.0, 300.0, 22.0, 40.0);
    let w = left + 2.0 * bw + 60.0;
    let h = top + bh * rows.len() as f64 + 20.0;
    let vmax = rows.iter().filter_map(|r| r.1).fold(1e-12f64, |m, v| m.max(v.abs()));
    let zero = left + bw;
    let mut s = svg_open(w, h);
    writeln!(s, "<text x=\"10\" y=\"20\" font-size=\"13\">Scoring-rule skill vs {}</text>", escape(&r.scores.benchmark)).unwrap();
    writeln!(s, "<line x1=\"{zero}\" y1=\"{}\" x2=\"{zero}\" y2=\"{}\" stroke=\"black\"/>", top - 5.0, h - 15.0).unwrap();
    for (i, (name, v)) in rows.iter().enumerate() {
        let y = top + bh * i as f64;
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", left - 6.0, y + 15.0, escape(name)).unwrap();
        if let Some(v) = v {
            let len = bw * v.abs() / vmax;
            let x = if *v >= 0.0 { zero } else { zero - len };
            let color = if *v >= 0.0 { "#1b9e77" } else { "#d95f02" };
            writeln!(s, "<rect x=\"{x:.2}\" y=\"{}\" width=\"{len:.2}\" height=\"{}\" fill=\"{color}\"/><text x=\"{}\" y=\"{}\">{}</text>", y + 3.0, bh - 6.0, zero + bw + 5.0, y + 15.0, super::render::format_percent(*v)).unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

pub const PLOT_FILES: [&str; 3] = ["coverage.svg", "skill_heatmap.svg", "skill_bars.svg"];

pub fn write_plots(dir: &std::path::Path, r: &EvaluationReport) -> std::io::Result<()> {
    std::fs::write(dir.join(PLOT_FILES[0]), coverage_svg(r))?;
    std::fs::write(dir.join(PLOT_FILES[1]), skill_heatmap_svg(r))?;
    std::fs::write(dir.join(PLOT_FILES[2]), skill_bars_svg(r))
}
