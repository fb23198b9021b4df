use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PointResult, SuiteError, SuiteOutcome};
use crate::audit::{Axis, Metric};

pub const METRICS_HEADER: [&str; 9] = [
    "protocol",
    "n",
    "d",
    "max_table_size",
    "table_count",
    "mean_lookup_requests",
    "mean_links_used",
    "reconfig_messages",
    "manual_intervention",
];

const EVIDENCE_HEADER: [&str; 18] = [
    "scenario",
    "case",
    "protocol",
    "n",
    "d",
    "seed",
    "lookups",
    "success_rate",
    "mean_hops",
    "max_request_share",
    "untruthful",
    "changes",
    "tables_updated",
    "records_moved",
    "name_accepted",
    "placement_honored",
    "name_stable",
    "events",
];

/// One row per grid point; the header is always written.
pub fn metrics_csv(points: &[PointResult]) -> Result<String, SuiteError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for p in points {
        w.serialize(&p.measurement.record)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn evidence_csv(points: &[PointResult]) -> Result<String, SuiteError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVIDENCE_HEADER)?;
    for p in points {
        let m = &p.measurement;
        w.write_record([
            p.scenario.clone(),
            p.case.to_string(),
            m.record.protocol.clone(),
            m.record.n.to_string(),
            m.record.d.to_string(),
            p.seed.to_string(),
            m.lookups.to_string(),
            format!("{:.6}", m.success_rate),
            format!("{:.6}", m.mean_hops),
            format!("{:.6}", m.max_request_share),
            m.untruthful.to_string(),
            m.changes.to_string(),
            m.reconfig.tables_updated.to_string(),
            m.reconfig.records_moved.to_string(),
            m.name_accepted.to_string(),
            m.placement_honored.to_string(),
            m.name_stable.to_string(),
            m.events.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Log-log line chart. Non-positive values cannot be placed and are skipped.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 56.0;
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#,
        H - M,
        W - M,
        H - M,
        H - M
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log {}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">log {}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    if !pts.is_empty() {
        let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&lx);
        let (y0, y1) = span(&ly);
        let px = |v: f64| M + (v - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);
        let path: Vec<String> = lx.iter().zip(&ly).map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
        for ((&x, &y), &(rx, ry)) in lx.iter().zip(&ly).zip(&pts) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"><title>{rx}, {ry:.3}</title></circle>"#,
                px(x),
                py(y)
            );
        }
        let _ = writeln!(svg, r#"<text x="{M}" y="{}" font-size="10">{}</text>"#, H - M + 14.0, pts[0].0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
            W - M,
            H - M + 14.0,
            pts[pts.len() - 1].0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const PLOTTED: [Metric; 6] = [
    Metric::MaxTableSize,
    Metric::TableCount,
    Metric::LookupRequests,
    Metric::LinksUsed,
    Metric::ReconfigMessages,
    Metric::RecordsMoved,
];

fn write(dir: &Path, name: &str, content: &str) -> Result<(), SuiteError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| SuiteError::Io { path, source })
}

/// Writes metrics.csv, evidence.csv, table1.txt, table1.csv, conjecture.txt,
/// failures.txt and plots/*.svg under `dir`.
pub fn write_outputs(outcome: &SuiteOutcome, dir: &Path) -> Result<(), SuiteError> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots).map_err(|source| SuiteError::Io { path: plots.clone(), source })?;
    write(dir, "metrics.csv", &metrics_csv(&outcome.points)?)?;
    write(dir, "evidence.csv", &evidence_csv(&outcome.points)?)?;
    write(dir, "table1.txt", &outcome.table.to_text())?;
    write(dir, "table1.csv", &outcome.table.to_csv())?;
    let conjecture = match &outcome.conjecture {
        Ok(r) => r.to_text(),
        Err(e) => format!("conjecture check failed: {e}\n"),
    };
    write(dir, "conjecture.txt", &conjecture)?;
    let failures: String = outcome.failures.iter().map(|e| format!("{e}\n")).collect();
    write(dir, "failures.txt", &failures)?;
    for sw in &outcome.sweeps.sweeps {
        for axis in [Axis::N, Axis::D] {
            if sw.axis(axis).is_empty() {
                continue;
            }
            for metric in PLOTTED {
                let pts: Vec<(f64, f64)> = sw
                    .axis(axis)
                    .iter()
                    .map(|m| {
                        let x = if axis == Axis::N { m.record.n } else { m.record.d };
                        (x as f64, metric.value(m))
                    })
                    .collect();
                let title = format!("{} ({}) {} vs {axis}", sw.protocol.label(), sw.case, metric.label());
                let name = format!("{}-{}-{axis}-{}.svg", sw.protocol.label(), sw.case, metric.label());
                write(&plots, &name, &svg_plot(&title, &axis.to_string(), metric.label(), &pts))?;
            }
        }
    }
    Ok(())
}
