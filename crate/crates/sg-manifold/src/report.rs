//! Deterministic machine-readable outputs: JSON reports, CSV time series,
//! and dependency-free SVG line plots. Every file embeds the config hash and
//! (when applicable) the model manifest hash. No wall-clock data lands in
//! these files; timings go to stderr.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Serialize a report to pretty JSON with provenance hashes injected at the
/// top level, and write it atomically.
pub fn write_json<T: Serialize>(
    path: &Path,
    payload: &T,
    config_sha: &str,
    model_sha: Option<&str>,
) -> Result<()> {
    let mut value =
        serde_json::to_value(payload).map_err(|e| Error::Serialization(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert(
            "config_sha256".into(),
            serde_json::Value::String(config_sha.to_string()),
        );
        if let Some(m) = model_sha {
            map.insert(
                "model_manifest_sha256".into(),
                serde_json::Value::String(m.to_string()),
            );
        }
    }
    let text =
        serde_json::to_string_pretty(&value).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// CSV writer with `# key = value` provenance comments and a header row.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(config_sha: &str, model_sha: Option<&str>, columns: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# config_sha256 = {config_sha}");
        if let Some(m) = model_sha {
            let _ = writeln!(buf, "# model_manifest_sha256 = {m}");
        }
        let _ = writeln!(buf, "{}", columns.join(","));
        Self { buf }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{v}");
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn row_mixed(&mut self, values: &[CsvField]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(',');
            }
            match v {
                CsvField::Int(i) => {
                    let _ = write!(self.buf, "{i}");
                }
                CsvField::Float(f) => {
                    let _ = write!(self.buf, "{f}");
                }
                CsvField::Str(s) => {
                    let _ = write!(self.buf, "{s}");
                }
            }
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.buf.as_bytes())
    }
}

pub enum CsvField {
    Int(i64),
    Float(f64),
    Str(String),
}

/// Write through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One named series for an SVG log-log plot.
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Minimal hand-rolled SVG log-log line plot (no plotting dependency).
pub fn svg_loglog(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[PlotSeries],
    config_sha: &str,
    model_sha: Option<&str>,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;
    let colors = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let (x0, x1, y0, y1) = if pts.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let pad = |a: f64, b: f64| {
            if (b - a).abs() < 1e-12 {
                (a - 0.5, b + 0.5)
            } else {
                (a - 0.05 * (b - a), b + 0.05 * (b - a))
            }
        };
        let (x0, x1) = pad(xmin, xmax);
        let (y0, y1) = pad(ymin, ymax);
        (x0, x1, y0, y1)
    };
    let sx = |lx: f64| ML + (lx - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |ly: f64| H - MB - (ly - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<!-- config_sha256 = {config_sha} -->");
    if let Some(m) = model_sha {
        let _ = writeln!(svg, "<!-- model_manifest_sha256 = {m} -->");
    }
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        W / 2.0
    );
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    // decade ticks
    for d in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let lx = d as f64;
        if lx < x0 || lx > x1 {
            continue;
        }
        let px = sx(lx);
        let _ = writeln!(
            svg,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#ccc\"/>",
            MT,
            H - MB
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e{d}</text>",
            H - MB + 16.0
        );
    }
    for d in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let ly = d as f64;
        if ly < y0 || ly > y1 {
            continue;
        }
        let py = sy(ly);
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#ccc\"/>",
            W - MR
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{d}</text>",
            ML - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{xlabel}</text>",
        (ML + W - MR) / 2.0,
        H - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{ylabel}</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10())))
            .collect();
        if path.len() >= 2 {
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
                path.join(" ")
            );
        }
        for p in &path {
            let mut it = p.split(',');
            let (px, py) = (it.next().unwrap(), it.next().unwrap());
            let _ = writeln!(
                svg,
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>"
            );
        }
        let ly = MT + 16.0 * k as f64 + 4.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"3\" fill=\"{color}\"/>",
            W - MR - 150.0,
            ly
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            W - MR - 132.0,
            ly + 6.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_embeds_hashes() {
        let mut c = Csv::new("cfg", Some("mdl"), &["a", "b"]);
        c.row(&[1.0, 2.5]);
        assert!(c
            .buf
            .starts_with("# config_sha256 = cfg\n# model_manifest_sha256 = mdl\na,b\n1,2.5\n"));
    }

    #[test]
    fn svg_contains_series() {
        let s = svg_loglog(
            "t",
            "x",
            "y",
            &[PlotSeries {
                label: "demo".into(),
                points: vec![(0.01, 1e-3), (0.1, 1e-1)],
            }],
            "cfg",
            None,
        );
        assert!(s.contains("polyline"));
        assert!(s.contains("config_sha256 = cfg"));
    }
}
