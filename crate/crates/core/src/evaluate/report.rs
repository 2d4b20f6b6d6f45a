//! CSV and SVG outputs of an evaluation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluate::roc::{OperatingPoint, RocCurve};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, value: f64) -> Self {
        Self { metric: metric.into(), value, ci: None }
    }

    pub fn with_ci(metric: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { metric: metric.into(), value, ci: Some((lo, hi)) }
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["metric", "value", "ci_lo", "ci_hi"]).map_err(Error::csv(path))?;
    for r in rows {
        let (lo, hi) = match r.ci {
            Some((lo, hi)) => (fmt_f64(lo), fmt_f64(hi)),
            None => (String::new(), String::new()),
        };
        w.write_record([r.metric.clone(), fmt_f64(r.value), lo, hi]).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Reads back `(metric, value, ci)` rows written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let parse = |s: &str, row: usize| -> Result<f64> {
        match s {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => s.parse().map_err(|_| Error::parse(path, row, format!("bad number {s:?}"))),
        }
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(Error::csv(path))?;
        let row = i + 2;
        let value = parse(rec.get(1).unwrap_or(""), row)?;
        let ci = match (rec.get(2).unwrap_or(""), rec.get(3).unwrap_or("")) {
            ("", "") => None,
            (lo, hi) => Some((parse(lo, row)?, parse(hi, row)?)),
        };
        out.push(MetricRow { metric: rec.get(0).unwrap_or("").to_string(), value, ci });
    }
    Ok(out)
}

/// A curve to draw, with an optional confidence band and marker.
pub struct RocSeries<'a> {
    pub name: String,
    pub curve: &'a RocCurve,
    pub auc: f64,
    /// `(fpr, sensitivity lo, sensitivity hi)` over a grid.
    pub band: Option<&'a [(f64, f64, f64)]>,
    pub operating_point: Option<OperatingPoint>,
    pub dotted: bool,
}

pub fn write_roc_points(path: &Path, series: &[RocSeries<'_>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["set", "threshold", "fpr", "sensitivity", "specificity"]).map_err(Error::csv(path))?;
    for s in series {
        for p in &s.curve.points {
            w.write_record([
                s.name.clone(),
                fmt_f64(p.threshold),
                fmt_f64(1.0 - p.specificity),
                fmt_f64(p.sensitivity),
                fmt_f64(p.specificity),
            ])
            .map_err(Error::csv(path))?;
        }
    }
    w.flush().map_err(Error::io(path))
}

const PALETTE: [&str; 4] = ["#1f5fa8", "#c8452c", "#3c8d3f", "#7a4f9a"];

/// ROC plot: one line per series, shaded confidence bands and an
/// operating-point marker.
pub fn roc_svg(series: &[RocSeries<'_>]) -> String {
    let (w, h, m) = (420.0, 420.0, 50.0);
    let side = w - 2.0 * m;
    let px = |fpr: f64| m + fpr * side;
    let py = |tpr: f64| h - m - tpr * side;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{m}" y="{m}" width="{side}" height="{side}" fill="none" stroke="#444"/>"##);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#, px(t), h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#, m - 6.0, py(t) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1 - specificity</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">sensitivity</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = ser.band {
            let mut pts: Vec<String> = band.iter().map(|&(f, _, hi)| format!("{:.2},{:.2}", px(f), py(hi))).collect();
            pts.extend(band.iter().rev().map(|&(f, lo, _)| format!("{:.2},{:.2}", px(f), py(lo))));
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, pts.join(" "));
        }
        let pts: Vec<String> = ser
            .curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(1.0 - p.specificity), py(p.sensitivity)))
            .collect();
        let dash = if ser.dotted { r#" stroke-dasharray="2 3""# } else { "" };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, pts.join(" "));
        if let Some(op) = ser.operating_point {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                px(1.0 - op.specificity),
                py(op.sensitivity)
            );
        }
        let ly = h - m - 12.0 - 16.0 * (series.len() - 1 - i) as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            px(0.45),
            px(0.53)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{} (AUC {:.3})</text>"#,
            px(0.55),
            ly + 4.0,
            xml_escape(&ser.name),
            ser.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
