//! Minimal self-contained SVG line plots for the CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qdrl_core::agent::LOG_COLUMNS;

use crate::sweep::SWEEP_COLUMNS;
use crate::{CliError, Result};

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Frequency floor drawn on trajectory plots, Hz.
pub const FREQUENCY_REFERENCE_HZ: f64 = 59.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    TrainingLog,
    Trajectory { generators: usize },
    Sweep,
}

fn expected_columns() -> String {
    format!(
        "expected one of:\n  training log: {}\n  trajectory: time_s, f1_hz..fN_hz, ace_pu, u_pu, a1_pu..aN_pu, reward\n  sweep: {}",
        LOG_COLUMNS.join(", "),
        SWEEP_COLUMNS.join(", ")
    )
}

pub fn detect_schema(header: &[String]) -> Option<Schema> {
    if header.iter().eq(LOG_COLUMNS.iter()) {
        return Some(Schema::TrainingLog);
    }
    if header.iter().eq(SWEEP_COLUMNS.iter()) {
        return Some(Schema::Sweep);
    }
    if header.len() >= 6 && header.len().is_multiple_of(2) {
        let n = (header.len() - 4) / 2;
        let mut want = vec!["time_s".to_string()];
        want.extend((1..=n).map(|j| format!("f{j}_hz")));
        want.push("ace_pu".into());
        want.push("u_pu".into());
        want.extend((1..=n).map(|j| format!("a{j}_pu")));
        want.push("reward".into());
        if header == want.as_slice() {
            return Some(Schema::Trajectory { generators: n });
        }
    }
    None
}

fn parse_field(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn series(rows: &[Vec<String>], x: usize, y: usize, name: &str) -> Series {
    Series {
        name: name.to_string(),
        points: rows.iter().filter_map(|r| Some((parse_field(&r[x])?, parse_field(&r[y])?))).collect(),
        dashed: false,
    }
}

fn hline(name: &str, y: f64, rows: &[Vec<String>], x: usize) -> Series {
    let xs: Vec<f64> = rows.iter().filter_map(|r| parse_field(&r[x])).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Series { name: name.to_string(), points: vec![(lo, y), (hi, y)], dashed: true }
}

/// Builds the panels for a parsed CSV.
pub fn panels(schema: Schema, rows: &[Vec<String>]) -> Vec<Panel> {
    match schema {
        Schema::TrainingLog => vec![
            Panel {
                title: "Episode return".into(),
                x_label: "episode".into(),
                y_label: "return".into(),
                series: vec![series(rows, 0, 2, "return")],
            },
            Panel {
                title: "Final frequency".into(),
                x_label: "episode".into(),
                y_label: "Hz".into(),
                series: vec![series(rows, 0, 4, "final"), series(rows, 0, 3, "minimum")],
            },
        ],
        Schema::Trajectory { generators } => {
            let mut s: Vec<Series> = (1..=generators).map(|j| series(rows, 0, j, &format!("f{j}"))).collect();
            s.push(hline(&format!("{FREQUENCY_REFERENCE_HZ} Hz"), FREQUENCY_REFERENCE_HZ, rows, 0));
            vec![Panel {
                title: "Generator frequency".into(),
                x_label: "time (s)".into(),
                y_label: "Hz".into(),
                series: s,
            }]
        }
        Schema::Sweep => {
            let param = rows.first().map(|r| r[0].clone()).unwrap_or_default();
            vec![
                Panel {
                    title: format!("Final frequency vs {param}"),
                    x_label: param.clone(),
                    y_label: "Hz".into(),
                    series: vec![series(rows, 1, 2, "final")],
                },
                Panel {
                    title: format!("Greedy return vs {param}"),
                    x_label: param,
                    y_label: "return".into(),
                    series: vec![series(rows, 1, 4, "return")],
                },
            ]
        }
    }
}

/// Tick spacing of 1, 2 or 5 × 10^k giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.01 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn decimals(step: f64) -> usize {
    if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_panel(svg: &mut String, panel: &Panel, top: f64) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (top + MARGIN_TOP, top + PANEL_HEIGHT - MARGIN_BOTTOM);
    let points = || panel.series.iter().flat_map(|s| s.points.iter());
    let (xmin, xmax) = range(points().map(|p| p.0));
    let (ymin, ymax) = range(points().map(|p| p.1));
    let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
    let sy = |y: f64| y1 - (y - ymin) / (ymax - ymin) * (y1 - y0);

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        top + 20.0,
        escape(&panel.title)
    );
    let _ = writeln!(svg, r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##, x1 - x0, y1 - y0);

    for (lo, hi, horizontal) in [(xmin, xmax, false), (ymin, ymax, true)] {
        let step = nice_step(hi - lo, 5.0);
        let digits = decimals(step);
        let mut t = (lo / step).ceil() * step;
        while t <= hi + 1e-9 * step {
            let label = format!("{:.*}", digits, if t.abs() < step * 1e-9 { 0.0 } else { t });
            if horizontal {
                let y = sy(t);
                let _ = writeln!(svg, r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ddd"/>"##);
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{label}</text>"#,
                    x0 - 6.0,
                    y + 4.0
                );
            } else {
                let x = sx(t);
                let _ = writeln!(svg, r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#ddd"/>"##);
                let _ = writeln!(
                    svg,
                    r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{label}</text>"#,
                    y1 + 16.0
                );
            }
            t += step;
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 36.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 - 52.0,
        (y0 + y1) / 2.0,
        x0 - 52.0,
        (y0 + y1) / 2.0,
        escape(&panel.y_label)
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = if s.dashed { "#555" } else { PALETTE[i % PALETTE.len()] };
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = y0 + 10.0 + 18.0 * i as f64;
        let lx = x1 + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
}

pub fn render_svg(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut svg, p, PANEL_HEIGHT * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads a CSV, recognises its schema and writes the SVG.
pub fn render_file(input: &Path, output: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(CliError::io(input))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(CliError::csv(input))?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Invalid(format!("{}: empty CSV", input.display())));
    }
    let schema = detect_schema(&header)
        .ok_or_else(|| CliError::Invalid(format!("{}: unknown CSV schema; {}", input.display(), expected_columns())))?;
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(CliError::csv(input))?;
    if rows.is_empty() {
        return Err(CliError::Invalid(format!("{}: no data rows", input.display())));
    }
    let svg = render_svg(&panels(schema, &rows));
    fs::write(output, svg).map_err(CliError::io(output))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn schemas_recognised() {
        assert_eq!(detect_schema(&strings(&LOG_COLUMNS)), Some(Schema::TrainingLog));
        assert_eq!(detect_schema(&strings(&SWEEP_COLUMNS)), Some(Schema::Sweep));
        let traj = strings(&["time_s", "f1_hz", "f2_hz", "ace_pu", "u_pu", "a1_pu", "a2_pu", "reward"]);
        assert_eq!(detect_schema(&traj), Some(Schema::Trajectory { generators: 2 }));
        assert_eq!(detect_schema(&strings(&["a", "b"])), None);
        let shuffled = strings(&["time_s", "f2_hz", "f1_hz", "ace_pu", "u_pu", "a1_pu", "a2_pu", "reward"]);
        assert_eq!(detect_schema(&shuffled), None);
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(0.9, 5.0), 0.2);
        assert_eq!(nice_step(300.0, 5.0), 100.0);
    }

    #[test]
    fn trajectory_plot_has_reference_line() {
        let rows = vec![strings(&["0", "60", "0", "0", "0", "0"]), strings(&["1", "59.8", "0", "0", "0", "-0.1"])];
        let p = panels(Schema::Trajectory { generators: 1 }, &rows);
        let reference = p[0].series.last().unwrap();
        assert!(reference.dashed);
        assert_eq!(reference.points, vec![(0.0, 59.9), (1.0, 59.9)]);
        let svg = render_svg(&p);
        assert!(svg.starts_with("<svg") && svg.contains("59.9 Hz"));
        assert_eq!(svg, render_svg(&p));
    }

    #[test]
    fn flat_series_get_a_usable_range() {
        let (lo, hi) = range([60.0, 60.0].into_iter());
        assert!(lo < 60.0 && hi > 60.0);
        assert_eq!(range(std::iter::empty()), (0.0, 1.0));
    }
}
