//! Record formatting: CSV, line-delimited JSON, and SVG plots of scan CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::config::OutputFormat;

/// A cell of an output record.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Real(x) => sig9(*x),
            Value::Int(n) => n.to_string(),
        }
    }
}

/// Nine significant digits, plain notation for moderate magnitudes.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

/// A table of records with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// One JSON object per line with the CSV column names as keys.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push('{');
            for (i, (col, v)) in self.columns.iter().zip(row).enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let rendered = match v {
                    Value::Real(x) if !x.is_finite() => "null".to_string(),
                    _ => v.render(),
                };
                let _ = write!(out, "{}:{rendered}", serde_json::Value::from(*col));
            }
            out.push_str("}\n");
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json_lines(),
        }
    }
}

/// Write `contents` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One parsed scan point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Parse scan CSV (`a_rad,b_rad,C,stderr`).
pub fn parse_scan_csv(csv: &str) -> Result<Vec<ScanRow>, String> {
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h.starts_with("a_rad,b_rad,C") => {}
        other => return Err(format!("unexpected scan header {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<f64> = l
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad scan row `{l}`: {e}"))?;
            if cols.len() < 3 {
                return Err(format!("bad scan row `{l}`"));
            }
            Ok(ScanRow {
                a: cols[0],
                b: cols[1],
                c: cols[2],
            })
        })
        .collect()
}

/// Plot geometry shared by the renderer and its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotFrame {
    pub a_min: f64,
    pub a_max: f64,
}

impl PlotFrame {
    pub fn for_rows(rows: &[ScanRow]) -> Self {
        let a_min = rows.iter().map(|r| r.a).fold(f64::INFINITY, f64::min);
        let a_max = rows.iter().map(|r| r.a).fold(f64::NEG_INFINITY, f64::max);
        if a_max > a_min {
            PlotFrame { a_min, a_max }
        } else {
            PlotFrame {
                a_min: a_min - 0.5,
                a_max: a_min + 0.5,
            }
        }
    }

    pub fn x(&self, a: f64) -> f64 {
        MARGIN + (a - self.a_min) / (self.a_max - self.a_min) * (SVG_WIDTH - 2.0 * MARGIN)
    }

    pub fn y(&self, c: f64) -> f64 {
        SVG_HEIGHT / 2.0 - c * (SVG_HEIGHT / 2.0 - MARGIN)
    }
}

/// Render scan CSV as one polyline per distinct `b`, in order of appearance.
pub fn scan_svg(csv: &str) -> Result<String, String> {
    let rows = parse_scan_csv(csv)?;
    if rows.is_empty() {
        return Err("scan has no rows".into());
    }
    let frame = PlotFrame::for_rows(&rows);
    let mut order: Vec<u64> = Vec::new();
    let mut curves: BTreeMap<u64, Vec<ScanRow>> = BTreeMap::new();
    for r in &rows {
        let key = r.b.to_bits();
        if !curves.contains_key(&key) {
            order.push(key);
        }
        curves.entry(key).or_default().push(*r);
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1) = (frame.x(frame.a_min), frame.x(frame.a_max));
    for c in [-1.0, 0.0, 1.0] {
        let y = frame.y(c);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.3}" y1="{y:.3}" x2="{x1:.3}" y2="{y:.3}" stroke="#bbbbbb" stroke-width="1"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="end">{c}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" font-size="13" text-anchor="middle">a (rad)</text>"#,
        SVG_WIDTH / 2.0,
        SVG_HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.3}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.3})">C(a, b)</text>"#,
        SVG_HEIGHT / 2.0,
        SVG_HEIGHT / 2.0
    );
    for (i, key) in order.iter().enumerate() {
        let pts = &curves[key];
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.3},{:.3}", frame.x(r.a), frame.y(r.c)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-b="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            sig9(pts[0].b),
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" fill="{color}">b = {}</text>"#,
            SVG_WIDTH - MARGIN - 90.0,
            MARGIN - 30.0 + 14.0 * i as f64,
            sig9(pts[0].b)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Polyline point sets of an SVG made by [`scan_svg`], keyed by `data-b`.
pub fn svg_polylines(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out = Vec::new();
    for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
        let attr = |name: &str| {
            let start = line.find(&format!("{name}=\""))? + name.len() + 2;
            let end = line[start..].find('"')? + start;
            Some(line[start..end].to_string())
        };
        let (Some(b), Some(points)) = (attr("data-b"), attr("points")) else {
            continue;
        };
        let pts = points
            .split_whitespace()
            .filter_map(|p| {
                let (x, y) = p.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        out.push((b, pts));
    }
    out
}
