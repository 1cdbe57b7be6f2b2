//! Report persistence, CSV tables and the SVG chart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{compute_averages, io_err, EvalError, EvalReport, Metrics, REPORT_SCHEMA_VERSION};

pub const ITERATIONS_CSV: &str = "iterations.csv";
pub const AVERAGES_CSV: &str = "averages.csv";
pub const CHART_SVG: &str = "pinball.svg";
pub const REPORT_JSON: &str = "report.json";

pub fn save_report(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(path, json).map_err(io_err(path))
}

/// Reads a report and checks that its averages match its records.
pub fn load_report(path: &Path) -> Result<EvalReport, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let report: EvalReport = serde_json::from_str(&text)?;
    if report.provenance.schema_version != REPORT_SCHEMA_VERSION {
        return Err(EvalError::Version { found: report.provenance.schema_version, expected: REPORT_SCHEMA_VERSION });
    }
    let names: Vec<String> = report.averages.iter().map(|a| a.model.clone()).collect();
    let fresh = compute_averages(&report.records, &names);
    let near = |a: &Metrics, b: &Metrics| {
        [(a.mae, b.mae), (a.pinball, b.pinball), (a.bias, b.bias), (a.mape, b.mape)]
            .iter()
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0))
    };
    for (got, want) in report.averages.iter().zip(&fresh) {
        if got.iterations != want.iterations
            || got.filtered_iterations != want.filtered_iterations
            || got.terminated != want.terminated
            || !near(&got.metrics, &want.metrics)
            || !near(&got.filtered, &want.filtered)
        {
            return Err(EvalError::InconsistentReport { model: got.model.clone() });
        }
    }
    Ok(report)
}

/// Writes the per-iteration CSV, the averages CSV, the pinball chart and
/// the JSON report into `out_dir`.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let path = out_dir.join(ITERATIONS_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "iteration",
        "model",
        "train_rows",
        "test_rows",
        "mae",
        "pinball",
        "bias",
        "mape",
        "fit_plus_predict_seconds",
        "terminated",
    ])?;
    for r in &report.records {
        for m in &r.models {
            w.write_record([
                r.iteration.to_string(),
                m.model.clone(),
                r.train_rows.to_string(),
                r.test_rows.to_string(),
                m.metrics.mae.to_string(),
                m.metrics.pinball.to_string(),
                m.metrics.bias.to_string(),
                m.metrics.mape.to_string(),
                m.fit_plus_predict_seconds.to_string(),
                m.terminated.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    let mut written = vec![path];

    let path = out_dir.join(AVERAGES_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "model",
        "iterations",
        "mae",
        "pinball",
        "bias",
        "mape",
        "fit_plus_predict_seconds",
        "filtered_iterations",
        "filtered_mae",
        "filtered_pinball",
        "filtered_bias",
        "filtered_mape",
        "terminated",
    ])?;
    for a in &report.averages {
        w.write_record([
            a.model.clone(),
            a.iterations.to_string(),
            a.metrics.mae.to_string(),
            a.metrics.pinball.to_string(),
            a.metrics.bias.to_string(),
            a.metrics.mape.to_string(),
            a.fit_plus_predict_seconds.to_string(),
            a.filtered_iterations.to_string(),
            a.filtered.mae.to_string(),
            a.filtered.pinball.to_string(),
            a.filtered.bias.to_string(),
            a.filtered.mape.to_string(),
            a.terminated.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join(CHART_SVG);
    fs::write(&path, render_svg(report)).map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join(REPORT_JSON);
    save_report(report, &path)?;
    written.push(path);
    Ok(written)
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Pinball loss per iteration, one polyline per model on a log scale.
pub fn render_svg(report: &EvalReport) -> String {
    let (left, right, top, bottom) = (80.0, 600.0, 40.0, 420.0);
    let series: Vec<(&str, Vec<(usize, f64)>)> = report
        .averages
        .iter()
        .map(|a| {
            let pts = report
                .records
                .iter()
                .filter_map(|r| r.models.iter().find(|m| m.model == a.model).map(|m| (r.iteration, m.metrics.pinball)))
                .collect();
            (a.model.as_str(), pts)
        })
        .collect();
    let values = series.iter().flat_map(|(_, p)| p.iter().map(|&(_, v)| v)).filter(|v| *v > 0.0);
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo_dec, hi_dec) = if lo.is_finite() { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) } else { (0.0, 1.0) };
    let last = report.records.iter().map(|r| r.iteration).max().unwrap_or(0).max(1) as f64;
    let sx = |i: usize| left + (right - left) * i as f64 / last;
    let sy = |v: f64| {
        let l = if v > 0.0 { v.log10() } else { lo_dec };
        bottom - (bottom - top) * (l - lo_dec) / (hi_dec - lo_dec)
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 480" width="800" height="480" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="480" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="340" y="24" text-anchor="middle" font-size="14">Pinball loss per iteration</text>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    let mut d = lo_dec;
    while d <= hi_dec + 1e-9 {
        let y = sy(10f64.powf(d));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{}</text>"#, left - 6.0, y + 4.0, d as i64);
        d += 1.0;
    }
    let step = ((last / 10.0).ceil() as usize).max(1);
    for i in (0..=last as usize).step_by(step) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{i}</text>"#, sx(i), bottom + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#, (left + right) / 2.0, bottom + 36.0);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(i, v)| format!("{:.2},{:.2}", sx(i), sy(v))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let y = top + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="620" y1="{y}" x2="645" y2="{y}" stroke="{color}" stroke-width="2"/>"#);
        let _ = writeln!(s, r#"<text x="652" y="{}">{}</text>"#, y + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
