//! Volume-curve CSV, landmark summary and SVG plot.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::{write_file, IoError};
use crate::numfmt::format_sig;
use crate::volumetrics::{BiomarkerResult, CycleLandmarks, VolumeCurve};

/// `phase,volume_ml` with one row per phase.
pub fn curve_csv(curve: &VolumeCurve) -> String {
    let mut s = String::from("phase,volume_ml\n");
    for (p, v) in curve.volumes_ml.iter().enumerate() {
        writeln!(s, "{p},{}", format_sig(*v, 6)).unwrap();
    }
    s
}

/// `quantity,value` rows for the landmarks and ejection fractions.
pub fn summary_csv(l: &CycleLandmarks, b: &BiomarkerResult) -> String {
    let mut s = String::from("quantity,value\n");
    for (k, v) in [("max_phase", l.max_phase), ("min_phase", l.min_phase), ("prea_phase", l.prea_phase)] {
        writeln!(s, "{k},{v}").unwrap();
    }
    for (k, v) in [
        ("v_max_ml", l.v_max_ml),
        ("v_min_ml", l.v_min_ml),
        ("v_prea_ml", l.v_prea_ml),
        ("ef_percent", b.ef_percent),
        ("aef_percent", b.aef_percent),
    ] {
        writeln!(s, "{k},{}", format_sig(v, 6)).unwrap();
    }
    s
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;

/// Line plot of the curve with the three landmarks marked.
pub fn curve_svg(curve: &VolumeCurve, l: &CycleLandmarks, b: &BiomarkerResult) -> String {
    let v = &curve.volumes_ml;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo > 1e-9 { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let span_x = (v.len().max(2) - 1) as f64;
    let x = |p: usize| MARGIN + p as f64 / span_x * (WIDTH - 2.0 * MARGIN);
    let y = |vol: f64| HEIGHT - MARGIN - (vol - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">phase</text>"#, WIDTH / 2.0, HEIGHT - 15.0)
        .unwrap();
    writeln!(s, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">LA volume (mL)</text>"#, HEIGHT / 2.0, HEIGHT / 2.0).unwrap();
    for (val, label) in [(lo, format_sig(lo, 4)), (hi, format_sig(hi, 4))] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{label}</text>"#,
            MARGIN - 4.0,
            y(val) + 3.0
        )
        .unwrap();
    }
    let points: Vec<String> = v.iter().enumerate().map(|(p, &vol)| format!("{:.2},{:.2}", x(p), y(vol))).collect();
    writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, points.join(" "))
        .unwrap();
    for (p, vol, name, colour) in [
        (l.max_phase, l.v_max_ml, "Vmax", "firebrick"),
        (l.min_phase, l.v_min_ml, "Vmin", "darkgreen"),
        (l.prea_phase, l.v_prea_ml, "VpreA", "darkorange"),
    ] {
        let (px, py) = (x(p), y(vol));
        writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="{colour}"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{colour}">{name} {}</text>"#,
            px + 6.0,
            py - 6.0,
            format_sig(vol, 4)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="30" font-size="13" text-anchor="end">EF {}%  aEF {}%</text>"#,
        WIDTH - MARGIN,
        format_sig(b.ef_percent, 4),
        format_sig(b.aef_percent, 4)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub curve_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub svg: PathBuf,
}

/// Writes `<prefix>_curve.csv`, `<prefix>_summary.csv` and `<prefix>_curve.svg`.
pub fn write_report(
    curve: &VolumeCurve,
    l: &CycleLandmarks,
    b: &BiomarkerResult,
    prefix: &Path,
) -> Result<ReportPaths, IoError> {
    let with = |suffix: &str| {
        let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    let paths =
        ReportPaths { curve_csv: with("_curve.csv"), summary_csv: with("_summary.csv"), svg: with("_curve.svg") };
    write_file(&paths.curve_csv, curve_csv(curve))?;
    write_file(&paths.summary_csv, summary_csv(l, b))?;
    write_file(&paths.svg, curve_svg(curve, l, b))?;
    Ok(paths)
}
