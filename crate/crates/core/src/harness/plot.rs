//! SVG line charts straight from the aggregate CSV, no plotting crate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::AGGREGATE_HEADER;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("aggregate parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("plot I/O error for {path}: {message}")]
    Io { path: String, message: String },
}

/// One parsed aggregate row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub variant: String,
    pub iteration: u64,
    pub env_steps: u64,
    pub mean_extrinsic: f64,
    pub std_extrinsic: f64,
    pub mean_intrinsic: f64,
    pub std_intrinsic: f64,
    pub mean_length: f64,
    pub std_length: f64,
    pub mean_categories: f64,
    pub std_categories: f64,
}

pub fn parse_aggregate(text: &str) -> Result<Vec<AggRow>, PlotError> {
    let err = |line: usize, message: String| PlotError::Parse { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == AGGREGATE_HEADER => {}
        Some((_, other)) => return Err(err(1, format!("unexpected header `{other}`"))),
        None => return Err(err(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue; // trailing warning rows
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err(line_no, format!("expected 11 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64, PlotError> {
            fields[i]
                .parse()
                .map_err(|_| err(line_no, format!("bad number `{}` in field {}", fields[i], i + 1)))
        };
        let int = |i: usize| -> Result<u64, PlotError> {
            fields[i]
                .parse()
                .map_err(|_| err(line_no, format!("bad integer `{}` in field {}", fields[i], i + 1)))
        };
        rows.push(AggRow {
            variant: fields[0].to_string(),
            iteration: int(1)?,
            env_steps: int(2)?,
            mean_extrinsic: num(3)?,
            std_extrinsic: num(4)?,
            mean_intrinsic: num(5)?,
            std_intrinsic: num(6)?,
            mean_length: num(7)?,
            std_length: num(8)?,
            mean_categories: num(9)?,
            std_categories: num(10)?,
        });
    }
    Ok(rows)
}

struct Series {
    name: String,
    /// (env_steps, mean) points.
    points: Vec<(f64, f64)>,
    /// Optional (lower, upper) band per point.
    band: Option<Vec<(f64, f64)>>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const W: f64 = 800.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 150.0;
const MT: f64 = 42.0;
const MB: f64 = 52.0;

fn svg_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
        if let Some(band) = &s.band {
            for &(lo, hi) in band {
                ys.push(lo);
                ys.push(hi);
            }
        }
    }
    let (x_min, x_max) = span(&xs, 0.0, 1.0);
    let (mut y_min, mut y_max) = span(&ys, 0.0, 1.0);
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    } else {
        let pad = (y_max - y_min) * 0.05;
        y_min -= pad;
        y_max += pad;
    }
    let sx = move |x: f64| ML + (x - x_min) / (x_max - x_min).max(1e-12) * (W - ML - MR);
    let sy = move |y: f64| H - MB - (y - y_min) / (y_max - y_min).max(1e-12) * (H - MT - MB);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        (W - MR + ML) / 2.0
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MB,
        W - MR,
        H - MB
    );
    let _ = writeln!(svg, r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#, H - MB);
    // Ticks and labels.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = sx(fx);
        let _ = writeln!(
            svg,
            r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#,
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            H - MB + 18.0,
            tick_label(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = sy(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{py}" x2="{ML}" y2="{py}" stroke="black"/>"#,
            ML - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ML - 8.0,
            py + 4.0,
            tick_label(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">environment steps</text>"#,
        (W - MR + ML) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        (H - MB + MT) / 2.0,
        (H - MB + MT) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = &s.band {
            let mut d = String::new();
            for (j, (&(x, _), &(lo, _))) in s.points.iter().zip(band).enumerate() {
                let _ = write!(d, "{}{},{} ", if j == 0 { "" } else { " " }, sx(x), sy(lo));
            }
            for (&(x, _), &(_, hi)) in s.points.iter().zip(band).rev() {
                let _ = write!(d, " {},{}", sx(x), sy(hi));
            }
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15"/>"#, d.trim());
        }
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{},{}", sx(x), sy(y))).collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
        }
        let ly = MT + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            W - MR + 10.0,
            W - MR + 34.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            W - MR + 40.0,
            ly + 4.0,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn span(values: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    if values.is_empty() {
        (lo, hi)
    } else {
        (
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1000.0 {
        format!("{:.0}", v)
    } else {
        format!("{:.3}", v)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn variants_in_order(rows: &[AggRow]) -> Vec<String> {
    let mut names = Vec::new();
    for r in rows {
        if !names.contains(&r.variant) {
            names.push(r.variant.clone());
        }
    }
    names
}

fn build_series(
    rows: &[AggRow],
    mean: impl Fn(&AggRow) -> f64,
    std: Option<&dyn Fn(&AggRow) -> f64>,
    skip_all_negative: bool,
) -> Vec<Series> {
    let mut out = Vec::new();
    for name in variants_in_order(rows) {
        let var_rows: Vec<&AggRow> = rows.iter().filter(|r| r.variant == name).collect();
        if skip_all_negative && var_rows.iter().all(|r| mean(r) < 0.0) {
            continue;
        }
        let points: Vec<(f64, f64)> = var_rows.iter().map(|r| (r.env_steps as f64, mean(r))).collect();
        let band = std.map(|s| {
            var_rows
                .iter()
                .map(|r| (mean(r) - s(r), mean(r) + s(r)))
                .collect()
        });
        out.push(Series { name, points, band });
    }
    out
}

/// Emits one SVG per metric into `out_dir` and returns the paths written.
pub fn emit_plots(aggregate_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let text = std::fs::read_to_string(aggregate_csv).map_err(|e| PlotError::Io {
        path: aggregate_csv.display().to_string(),
        message: e.to_string(),
    })?;
    let rows = parse_aggregate(&text)?;
    std::fs::create_dir_all(out_dir).map_err(|e| PlotError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let charts: [(&str, &str, &str, String); 4] = [
        (
            "score.svg",
            "Mean episode score",
            "extrinsic reward",
            svg_chart(
                "Mean episode score",
                "extrinsic reward",
                &build_series(&rows, |r| r.mean_extrinsic, Some(&|r| r.std_extrinsic), false),
            ),
        ),
        (
            "intrinsic.svg",
            "Mean episode intrinsic reward",
            "intrinsic reward",
            svg_chart(
                "Mean episode intrinsic reward",
                "intrinsic reward",
                &build_series(&rows, |r| r.mean_intrinsic, None, false),
            ),
        ),
        (
            "episode_length.svg",
            "Mean episode length",
            "steps per episode",
            svg_chart(
                "Mean episode length",
                "steps per episode",
                &build_series(&rows, |r| r.mean_length, None, false),
            ),
        ),
        (
            "categories.svg",
            "ART category count",
            "categories",
            svg_chart(
                "ART category count",
                "categories",
                &build_series(&rows, |r| r.mean_categories, None, true),
            ),
        ),
    ];
    let mut written = Vec::new();
    for (file, _, _, svg) in charts {
        let path = out_dir.join(file);
        std::fs::write(&path, svg).map_err(|e| PlotError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> String {
        let mut text = format!("{AGGREGATE_HEADER}\n");
        for variant in ["art-hl", "none"] {
            for i in 1..=10u64 {
                let m = i as f64 * 0.1;
                text.push_str(&format!(
                    "{variant},{i},{},{m},{:.3},{m},0.01,{},1.0,{},0\n",
                    i * 2048,
                    0.05,
                    100.0 + i as f64,
                    if variant == "none" { -1.0 } else { 20.0 }
                ));
            }
        }
        text
    }

    #[test]
    fn two_variants_draw_two_polylines_per_chart() {
        let rows = parse_aggregate(&sample_rows()).unwrap();
        let svg = svg_chart(
            "t",
            "y",
            &build_series(&rows, |r| r.mean_extrinsic, Some(&|r| r.std_extrinsic), false),
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
    }

    #[test]
    fn empty_data_draws_axes_only() {
        let svg = svg_chart("t", "y", &[]);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.matches("<line").count() >= 2);
        assert!(svg.contains("environment steps"));
    }

    #[test]
    fn band_encloses_mean_pointwise() {
        let rows = parse_aggregate(&sample_rows()).unwrap();
        let series = build_series(&rows, |r| r.mean_extrinsic, Some(&|r| r.std_extrinsic), false);
        for s in &series {
            let band = s.band.as_ref().unwrap();
            for (&(_, mean), &(lo, hi)) in s.points.iter().zip(band) {
                assert!(lo <= mean && mean <= hi);
            }
        }
    }

    #[test]
    fn all_negative_category_series_is_skipped() {
        let rows = parse_aggregate(&sample_rows()).unwrap();
        let series = build_series(&rows, |r| r.mean_categories, None, true);
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].name, "art-hl");
    }

    #[test]
    fn malformed_csv_names_line() {
        let mut text = format!("{AGGREGATE_HEADER}\n");
        text.push_str("art,1,2048,0.1,0,0.1,0,100,0,20,0\n");
        text.push_str("art,not-a-number\n");
        match parse_aggregate(&text) {
            Err(PlotError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn warning_rows_are_ignored() {
        let mut text = format!("{AGGREGATE_HEADER}\n");
        text.push_str("art,1,2048,0.1,0,0.1,0,100,0,20,0\n");
        text.push_str("# WARNING: run rnd seed 3 failed\n");
        assert_eq!(parse_aggregate(&text).unwrap().len(), 1);
    }

    #[test]
    fn emit_writes_four_svgs() {
        let dir = std::env::temp_dir().join(format!("artx-plot-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("aggregate.csv");
        std::fs::write(&csv, sample_rows()).unwrap();
        let written = emit_plots(&csv, &dir.join("plots")).unwrap();
        assert_eq!(written.len(), 4);
        for p in &written {
            let svg = std::fs::read_to_string(p).unwrap();
            assert!(svg.starts_with("<svg"));
            assert!(svg.ends_with("</svg>\n"));
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
}
