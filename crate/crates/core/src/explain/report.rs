//! CSV and SVG outputs of attribution summaries.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluate::report::{fmt_f64, xml_escape};
use crate::explain::summary::{FeatureImportance, GroupDifference, LocalRow};

/// One row per feature in importance order; group means and the test come
/// from the label groups.
pub fn write_global_csv(path: &Path, importance: &[FeatureImportance], diffs: &[GroupDifference]) -> Result<()> {
    let by_name: HashMap<&str, &GroupDifference> = diffs.iter().map(|d| (d.feature.as_str(), d)).collect();
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["feature", "mean_abs_shap", "mean_shap_pos", "mean_shap_neg", "U", "p"]).map_err(Error::csv(path))?;
    for r in importance {
        let d = by_name
            .get(r.feature.as_str())
            .ok_or_else(|| Error::Invalid(format!("no group difference for {}", r.feature)))?;
        w.write_record([r.feature.clone(), fmt_f64(r.mean_abs), fmt_f64(d.mean_pos), fmt_f64(d.mean_neg), fmt_f64(d.u), fmt_f64(d.p)])
            .map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_local_csv(path: &Path, rows: &[LocalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["feature", "shap", "group_mean_shap", "sign_agrees"]).map_err(Error::csv(path))?;
    for r in rows {
        w.write_record([r.feature.clone(), fmt_f64(r.phi), fmt_f64(r.group_mean), r.agrees.to_string()])
            .map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

const POS: &str = "#c8452c";
const NEG: &str = "#1f5fa8";

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Horizontal paired bars centred on zero, one row per feature.
fn paired_bars(title: &str, rows: &[(String, f64, f64, String)], legend: (&str, &str)) -> String {
    let label_w = 170.0;
    let plot_w = 360.0;
    let row_h = 22.0;
    let top = 40.0;
    let h = top + rows.len() as f64 * row_h + 40.0;
    let w = label_w + plot_w + 60.0;
    let span = rows.iter().flat_map(|r| [r.1.abs(), r.2.abs()]).filter(|v| v.is_finite()).fold(0.0f64, f64::max).max(1e-12);
    let x0 = label_w + plot_w / 2.0;
    let scale = plot_w / 2.0 / span;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, xml_escape(title));
    let _ = writeln!(s, r##"<line x1="{x0}" y1="{top}" x2="{x0}" y2="{:.1}" stroke="#444"/>"##, h - 40.0);
    for (i, (name, a, b, note)) in rows.iter().enumerate() {
        let y = top + i as f64 * row_h;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, label_w - 6.0, y + 15.0, xml_escape(name));
        for (k, (v, color)) in [(*a, POS), (*b, NEG)].into_iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let len = v.abs() * scale;
            let x = if v >= 0.0 { x0 } else { x0 - len };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{len:.2}" height="8" fill="{color}"/>"#,
                y + 3.0 + 9.0 * k as f64
            );
        }
        if !note.is_empty() {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, label_w + plot_w + 8.0, y + 15.0, xml_escape(note));
        }
    }
    let ly = h - 18.0;
    let _ = writeln!(s, r#"<rect x="{label_w}" y="{:.1}" width="12" height="8" fill="{POS}"/>"#, ly - 8.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, label_w + 16.0, xml_escape(legend.0));
    let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="12" height="8" fill="{NEG}"/>"#, label_w + 180.0, ly - 8.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, label_w + 196.0, xml_escape(legend.1));
    s.push_str("</svg>\n");
    s
}

/// Mean |SHAP| ranking next to per-group mean SHAP with significance marks.
pub fn global_svg(importance: &[FeatureImportance], diffs: &[GroupDifference]) -> String {
    let by_name: HashMap<&str, &GroupDifference> = diffs.iter().map(|d| (d.feature.as_str(), d)).collect();
    let rows: Vec<(String, f64, f64, String)> = importance
        .iter()
        .map(|r| {
            let (pos, neg, note) = match by_name.get(r.feature.as_str()) {
                Some(d) => (d.mean_pos, d.mean_neg, format!("{} |{:.3}|", stars(d.p), r.mean_abs)),
                None => (f64::NAN, f64::NAN, format!("|{:.3}|", r.mean_abs)),
            };
            (r.feature.clone(), pos, neg, note)
        })
        .collect();
    paired_bars("Mean SHAP value by label group", &rows, ("above action limit", "below action limit"))
}

pub fn local_svg(id: &str, rows: &[LocalRow]) -> String {
    let rows: Vec<(String, f64, f64, String)> = rows
        .iter()
        .map(|r| (r.feature.clone(), r.phi, r.group_mean, if r.agrees { String::new() } else { "differs".into() }))
        .collect();
    paired_bars(&format!("SHAP values of {id}"), &rows, ("this sample", "mean of positives"))
}
