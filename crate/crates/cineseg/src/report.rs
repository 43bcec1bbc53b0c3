//! Report emission: CSV tables, versioned JSON and SVG volume curves.
//!
//! Writers are deterministic (no timestamps) and refuse empty input without
//! touching the target path.

use std::fmt::Write as _;
use std::path::Path;

use cineseg_core::grid::{PerStructure, Structure};
use cineseg_core::selftrain::IterationReport;
use cineseg_core::stats::MeanStd;
use cineseg_core::temporal::TemporalReport;
use serde::Serialize;

use crate::container::write_file;
use crate::error::{Error, Result};

/// Version of the JSON report documents. Bumped on any incompatible change.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const ITERATION_COLUMNS: [&str; 13] = [
    "iteration",
    "structure",
    "flagged_fraction",
    "dice_std_mean",
    "dice_std_std",
    "extreme_count_mean",
    "extreme_count_std",
    "truth_dice_mean",
    "truth_dice_std",
    "truth_hd95_mm_mean",
    "truth_hd95_mm_std",
    "truth_assd_mm_mean",
    "truth_assd_mm_std",
];

pub const CURVE_COLUMNS: [&str; 4] = ["subject_id", "structure", "frame", "volume_mm3"];

pub const TEMPORAL_SUMMARY_COLUMNS: [&str; 5] = [
    "row",
    "subject_id",
    "structure",
    "dice_std",
    "extreme_count",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn mean_std(v: Option<MeanStd>) -> [String; 2] {
    match v {
        Some(m) => [fmt_f64(m.mean), fmt_f64(m.std)],
        None => [String::new(), String::new()],
    }
}

/// Serializes `rows` under `header` into memory.
pub fn csv_bytes<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn non_empty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Empty(format!("refusing to write an empty {what}")));
    }
    Ok(())
}

pub fn iteration_rows(r: &IterationReport) -> Vec<Vec<String>> {
    Structure::FOREGROUND
        .iter()
        .map(|&s| {
            let (dstd, ext) = match &r.temporal_summary {
                Some(t) => (t[s].dice_std, t[s].extreme_count),
                None => (None, None),
            };
            let (d, h, a) = match &r.truth_metrics {
                Some(m) => (m[s].dice, m[s].hd95_mm, m[s].assd_mm),
                None => (None, None, None),
            };
            let mut row = vec![
                r.iteration.to_string(),
                s.name().into(),
                fmt_f64(r.flagged_fraction[s]),
            ];
            for v in [dstd, ext, d, h, a] {
                row.extend(mean_std(v));
            }
            row
        })
        .collect()
}

/// One row per (iteration, structure), columns [`ITERATION_COLUMNS`].
pub fn write_csv_report(reports: &[IterationReport], path: &Path) -> Result<()> {
    non_empty(reports, "iteration report")?;
    let rows: Vec<Vec<String>> = reports.iter().flat_map(iteration_rows).collect();
    write_file(path, &csv_bytes(&ITERATION_COLUMNS, &rows))
}

#[derive(Serialize)]
struct JsonDocument<'a, T: Serialize> {
    schema_version: u32,
    kind: &'static str,
    items: &'a [T],
}

pub fn json_bytes<T: Serialize>(kind: &'static str, items: &[T]) -> Vec<u8> {
    let doc = JsonDocument {
        schema_version: REPORT_SCHEMA_VERSION,
        kind,
        items,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("reports serialize");
    out.push(b'\n');
    out
}

/// `{"schema_version": 1, "kind": "iteration_reports", "items": [...]}`.
pub fn write_json_report(reports: &[IterationReport], path: &Path) -> Result<()> {
    non_empty(reports, "iteration report")?;
    write_file(path, &json_bytes("iteration_reports", reports))
}

/// Volume curves: T rows per (study, structure), columns [`CURVE_COLUMNS`].
pub fn write_curve_csv(reports: &[TemporalReport], path: &Path) -> Result<()> {
    non_empty(reports, "temporal report")?;
    let mut rows = Vec::new();
    for r in reports {
        for (s, st) in r.per_structure.iter() {
            for (t, v) in st.curve.values.iter().enumerate() {
                rows.push(vec![
                    r.subject_id.clone(),
                    s.name().into(),
                    t.to_string(),
                    fmt_f64(*v),
                ]);
            }
        }
    }
    write_file(path, &csv_bytes(&CURVE_COLUMNS, &rows))
}

/// Per-study rows (`row = subject`) followed by cohort `mean` and `std` rows,
/// columns [`TEMPORAL_SUMMARY_COLUMNS`].
pub fn write_temporal_summary_csv(
    reports: &[TemporalReport],
    summary: &PerStructure<cineseg_core::temporal::TemporalSummary>,
    path: &Path,
) -> Result<()> {
    non_empty(reports, "temporal report")?;
    let mut rows = Vec::new();
    for r in reports {
        for (s, st) in r.per_structure.iter() {
            rows.push(vec![
                "subject".into(),
                r.subject_id.clone(),
                s.name().into(),
                fmt_opt(st.dice_std),
                st.extreme_count.map(|c| c.to_string()).unwrap_or_default(),
            ]);
        }
    }
    for (kind, pick) in [("mean", 0usize), ("std", 1)] {
        for (s, t) in summary.iter() {
            let d = mean_std(t.dice_std);
            let e = mean_std(t.extreme_count);
            rows.push(vec![
                kind.into(),
                String::new(),
                s.name().into(),
                d[pick].clone(),
                e[pick].clone(),
            ]);
        }
    }
    write_file(path, &csv_bytes(&TEMPORAL_SUMMARY_COLUMNS, &rows))
}

/// One polyline of an SVG plot.
#[derive(Debug, Clone)]
pub struct CurveSeries {
    pub label: String,
    pub structure: Structure,
    /// 0 for the first visit; later visits are drawn progressively fainter.
    pub visit: usize,
    pub values: Vec<f64>,
}

fn colour(s: Structure) -> &'static str {
    match s {
        Structure::LvMyo => "#1f77b4",
        Structure::Lv => "#d62728",
        Structure::Rv => "#2ca02c",
        Structure::La => "#9467bd",
        Structure::Ra => "#ff7f0e",
        Structure::Aorta => "#8c564b",
        Structure::PulmonaryArtery => "#e377c2",
        Structure::Background => "#7f7f7f",
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Self-contained SVG with one polyline per series; x = frame index,
/// y = volume in mm³.
pub fn svg_curves(title: &str, series: &[CurveSeries]) -> Result<String> {
    non_empty(series, "curve plot")?;
    let frames = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let finite = || {
        series
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .filter(|v| v.is_finite())
    };
    let mut lo = finite().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = finite().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() || hi <= lo {
        hi = lo + 1.0;
    }
    if !lo.is_finite() {
        lo = 0.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x_of = |t: usize| {
        LEFT + if frames > 1 {
            pw * t as f64 / (frames - 1) as f64
        } else {
            pw / 2.0
        }
    };
    let y_of = |v: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));
    let max_visit = series.iter().map(|s| s.visit).max().unwrap_or(0);

    let mut o = String::new();
    let _ = writeln!(o, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        o,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        o,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (LEFT, TOP + ph, LEFT + pw, TOP);
    let _ = writeln!(
        o,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        o,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for t in 0..frames {
        let x = x_of(t);
        let _ = writeln!(
            o,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 4.0
        );
        let _ = writeln!(
            o,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#,
            y0 + 18.0
        );
    }
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            o,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 4.0
        );
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.0}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{}" y="{}" text-anchor="middle">frame index</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">volume (mm³)</text>"#,
        TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let opacity = if max_visit == 0 {
            1.0
        } else {
            0.25 + 0.75 * s.visit as f64 / max_visit as f64
        };
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(t, &v)| format!("{:.2},{:.2}", x_of(t), y_of(v)))
            .collect();
        let _ = writeln!(
            o,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" stroke-opacity="{opacity:.2}" points="{}"><title>{}</title></polyline>"#,
            colour(s.structure),
            points.join(" "),
            escape(&s.label)
        );
        let ly = TOP + 14.0 * i as f64;
        if ly < HEIGHT - 10.0 {
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{}" stroke-opacity="{opacity:.2}" stroke-width="2"/>"#,
                lx + 18.0,
                colour(s.structure)
            );
            let _ = writeln!(
                o,
                r#"<text x="{}" y="{:.2}">{}</text>"#,
                lx + 24.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
    }
    o.push_str("</svg>\n");
    Ok(o)
}

pub fn write_svg_curves(title: &str, series: &[CurveSeries], path: &Path) -> Result<()> {
    let svg = svg_curves(title, series)?;
    write_file(path, svg.as_bytes())
}

/// The seven volume curves of one study.
pub fn study_series(r: &TemporalReport, visit: usize, suffix: &str) -> Vec<CurveSeries> {
    r.per_structure
        .iter()
        .map(|(s, st)| CurveSeries {
            label: format!("{}{suffix}", s.name()),
            structure: s,
            visit,
            values: st.curve.values.clone(),
        })
        .collect()
}
