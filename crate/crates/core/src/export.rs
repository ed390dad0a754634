//! Flat-file output: CSV and JSON-lines tables, and SVG plots of the
//! boundary torus.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::adscore::TorusPoint;
use crate::config::ConfigHash;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format_num(*v),
            Cell::Num(_) => "null".into(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => serde_json::to_string(s).expect("strings serialise"),
        }
    }
}

/// Named columns and rows of cells, written in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV: a `# config-hash` comment line, the header, then the rows.
    /// JSON lines: a `{"config_hash": ...}` record, then one object per row.
    pub fn write_to(&self, out: &mut impl Write, format: Format, hash: Option<&ConfigHash>) -> io::Result<()> {
        let hash = hash.map_or_else(|| "none".to_string(), |h| h.to_string());
        match format {
            Format::Csv => {
                writeln!(out, "# config-hash: {hash}")?;
                writeln!(out, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", line.join(","))?;
                }
            }
            Format::Jsonl => {
                writeln!(out, "{{\"config_hash\":\"{hash}\"}}")?;
                for row in &self.rows {
                    let fields: Vec<String> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).expect("strings serialise"), v.json()))
                        .collect();
                    writeln!(out, "{{{}}}", fields.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_string(&self, format: Format, hash: Option<&ConfigHash>) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf, format, hash).expect("writing to memory");
        String::from_utf8(buf).expect("output is UTF-8")
    }

    /// Writes `dir/stem.{csv,jsonl}` and returns the path.
    pub fn save(&self, dir: &Path, stem: &str, format: Format, hash: Option<&ConfigHash>) -> io::Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let mut file = io::BufWriter::new(std::fs::File::create(&path)?);
        self.write_to(&mut file, format, hash)?;
        file.flush()?;
        Ok(path)
    }
}

/// Layers of a boundary-torus plot on `[0, 2π)²`, `θ` horizontal and `θ′`
/// vertical.
#[derive(Debug, Clone, Default)]
pub struct TorusPlot {
    pub title: String,
    pub curve: Vec<TorusPoint>,
    pub markers: Vec<TorusPoint>,
    pub segments: Vec<(TorusPoint, TorusPoint)>,
}

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

fn px(theta: f64) -> f64 {
    PAD + theta / TAU * SIZE
}

fn py(theta_prime: f64) -> f64 {
    PAD + SIZE - theta_prime / TAU * SIZE
}

fn signed_gap(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

impl TorusPlot {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let full = SIZE + 2.0 * PAD;
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{full}\" height=\"{full}\" viewBox=\"0 0 {full} {full}\">"
        );
        let _ = writeln!(
            s,
            "<defs><clipPath id=\"torus\"><rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\"/></clipPath></defs>"
        );
        let _ = writeln!(s, "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\" stroke=\"black\"/>");
        for k in 1..4 {
            let t = TAU * k as f64 / 4.0;
            let _ = writeln!(
                s,
                "<line x1=\"{:.3}\" y1=\"{PAD}\" x2=\"{:.3}\" y2=\"{}\" stroke=\"#ddd\"/>",
                px(t),
                px(t),
                PAD + SIZE
            );
            let _ = writeln!(
                s,
                "<line x1=\"{PAD}\" y1=\"{:.3}\" x2=\"{}\" y2=\"{:.3}\" stroke=\"#ddd\"/>",
                py(t),
                PAD + SIZE,
                py(t)
            );
        }
        let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{:.0}\" font-size=\"14\">{}</text>", PAD * 0.6, escape(&self.title));
        let _ = writeln!(s, "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"12\">θ</text>", PAD + SIZE / 2.0, full - 8.0);
        let _ = writeln!(s, "<text x=\"8\" y=\"{:.0}\" font-size=\"12\">θ′</text>", PAD + SIZE / 2.0);
        let _ = writeln!(s, "<g clip-path=\"url(#torus)\">");
        for (a, b) in &self.segments {
            let (dt, dp) = (signed_gap(a.theta, b.theta), signed_gap(a.theta_prime, b.theta_prime));
            for (ox, oy) in shifts() {
                let _ = writeln!(
                    s,
                    "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#c33\" stroke-width=\"2\"/>",
                    px(a.theta + ox),
                    py(a.theta_prime + oy),
                    px(a.theta + dt + ox),
                    py(a.theta_prime + dp + oy)
                );
            }
        }
        for piece in self.curve_pieces() {
            let pts: Vec<String> = piece.iter().map(|(x, y)| format!("{:.3},{:.3}", px(*x), py(*y))).collect();
            let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#236\" stroke-width=\"1.5\"/>", pts.join(" "));
        }
        let _ = writeln!(s, "</g>");
        for m in &self.markers {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"5\" fill=\"none\" stroke=\"#c33\" stroke-width=\"2\"/>",
                px(m.theta),
                py(m.theta_prime)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Unwraps the curve; a step that leaves the square ends the current
    /// piece and is repeated, shifted back, at the start of the next.
    fn curve_pieces(&self) -> Vec<Vec<(f64, f64)>> {
        let mut pieces = Vec::new();
        let mut cur: Vec<(f64, f64)> = Vec::new();
        for p in &self.curve {
            let Some(&(x, y)) = cur.last() else {
                cur.push((p.theta, p.theta_prime));
                continue;
            };
            let (nx, ny) = (x + signed_gap(x, p.theta), y + signed_gap(y, p.theta_prime));
            cur.push((nx, ny));
            if !((0.0..TAU).contains(&nx) && (0.0..TAU).contains(&ny)) {
                pieces.push(std::mem::take(&mut cur));
                cur.push((x + p.theta - nx, y + p.theta_prime - ny));
                cur.push((p.theta, p.theta_prime));
            }
        }
        if cur.len() > 1 {
            pieces.push(cur);
        }
        pieces
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())
    }
}

fn shifts() -> impl Iterator<Item = (f64, f64)> {
    [-TAU, 0.0, TAU].into_iter().flat_map(|a| [-TAU, 0.0, TAU].into_iter().map(move |b| (a, b)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["x", "y", "label"]);
        t.push(vec![0.1.into(), Cell::Int(3), "a,b".into()]);
        t.push(vec![(1.0 / 3.0).into(), f64::NAN.into(), "plain".into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let hash = ConfigHash::of("x");
        let text = sample().to_string(Format::Csv, Some(&hash));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# config-hash: {hash}"));
        assert_eq!(lines[1], "x,y,label");
        assert_eq!(lines[2], "1.0000000000000001e-1,3,\"a,b\"");
        assert_eq!(lines[3], "3.3333333333333331e-1,NaN,plain");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -12345.678, 6.02e23] {
            assert_eq!(format_num(v).parse::<f64>().unwrap(), v);
            let digits = format_num(v).split('e').next().unwrap().replace(['.', '-'], "").len();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn jsonl_rows_parse() {
        let text = sample().to_string(Format::Jsonl, None);
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["config_hash"], "none");
        assert_eq!(lines[1]["label"], "a,b");
        assert_eq!(lines[1]["y"], 3);
        assert!(lines[2]["y"].is_null());
        assert_eq!(lines[2]["x"].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_rejected() {
        Table::new(&["a", "b"]).push(vec![1.0.into()]);
    }

    #[test]
    fn svg_contains_layers() {
        let tp = |a, b| TorusPoint::new(a, b);
        let plot = TorusPlot {
            title: "a < b".into(),
            curve: vec![tp(0.1, 0.1), tp(6.2, 0.2), tp(1.0, 1.0)],
            markers: vec![tp(0.0, 0.0), tp(PI, 0.0)],
            segments: vec![(tp(3.0 * PI / 2.0, PI / 2.0), tp(0.0, 0.0))],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("stroke=\"#c33\" stroke-width=\"2\"/>").count(), 9 + 2);
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg, plot.render());
    }
}
