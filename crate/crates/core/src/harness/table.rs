//! Result tables, CSV and SVG emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub keys: Vec<String>,
    pub trial: usize,
    pub metrics: Vec<f64>,
}

/// Per-trial rows of one sweep. Key columns identify a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub keys: Vec<String>,
    pub metrics: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub keys: Vec<String>,
    pub n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

impl Table {
    pub fn new(name: &str, keys: &[&str], metrics: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            keys: keys.iter().map(|s| s.to_string()).collect(),
            metrics: metrics.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn key_index(&self, key: &str) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    pub fn metric_index(&self, metric: &str) -> Option<usize> {
        self.metrics.iter().position(|k| k == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .keys
            .iter()
            .map(String::as_str)
            .chain(["trial"])
            .chain(self.metrics.iter().map(String::as_str))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut cells = r.keys.clone();
            cells.push(r.trial.to_string());
            cells.extend(r.metrics.iter().map(|&v| fmt_metric(v)));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Mean and sample standard deviation per grid point, in first-seen
    /// order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<Vec<String>> = Vec::new();
        let mut groups: BTreeMap<Vec<String>, Vec<&Row>> = BTreeMap::new();
        for r in &self.rows {
            let e = groups.entry(r.keys.clone()).or_default();
            if e.is_empty() {
                order.push(r.keys.clone());
            }
            e.push(r);
        }
        order
            .into_iter()
            .map(|keys| {
                let rows = &groups[&keys];
                let n = rows.len();
                let (mean, std) = (0..self.metrics.len())
                    .map(|m| {
                        let vals: Vec<f64> = rows.iter().map(|r| r.metrics[m]).collect();
                        let mean = vals.iter().sum::<f64>() / n as f64;
                        let std = if n > 1 {
                            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                        } else {
                            0.0
                        };
                        (mean, std)
                    })
                    .unzip();
                SummaryRow { keys, n, mean, std }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut header: Vec<String> = self.keys.clone();
        header.push("n".into());
        for m in &self.metrics {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        let mut out = header.join(",");
        out.push('\n');
        for s in self.summary() {
            let mut cells = s.keys.clone();
            cells.push(s.n.to_string());
            for (m, d) in s.mean.iter().zip(&s.std) {
                cells.push(fmt_metric(*m));
                cells.push(fmt_metric(*d));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Per-trial values of `metric` at the grid point whose key columns
    /// match `keys`, indexed by trial.
    pub fn values(&self, keys: &[(&str, &str)], metric: &str) -> Vec<(usize, f64)> {
        let m = self.metric_index(metric).expect("known metric");
        let idx: Vec<(usize, &str)> = keys
            .iter()
            .map(|(k, v)| (self.key_index(k).expect("known key"), *v))
            .collect();
        self.rows
            .iter()
            .filter(|r| idx.iter().all(|(i, v)| r.keys[*i] == *v))
            .map(|r| (r.trial, r.metrics[m]))
            .collect()
    }

    /// Line chart of the mean of `metric` against the numeric key `x`,
    /// one polyline per value of `series`. Non-finite x values are skipped.
    pub fn to_svg(&self, x: &str, series: &str, metric: &str) -> Result<String> {
        let (xi, si) = match (self.key_index(x), self.key_index(series)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Config(format!("cannot chart {x} by {series}"))),
        };
        let mi = self
            .metric_index(metric)
            .ok_or_else(|| Error::Config(format!("unknown metric {metric}")))?;
        let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for s in self.summary() {
            if let Ok(xv) = s.keys[xi].parse::<f64>() {
                if xv.is_finite() && s.mean[mi].is_finite() {
                    lines.entry(s.keys[si].clone()).or_default().push((xv, s.mean[mi]));
                }
            }
        }
        let pts = lines.values().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(a, b) in pts {
            x0 = x0.min(a);
            x1 = x1.max(a);
            y0 = y0.min(b);
            y1 = y1.max(b);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let sx = |v: f64| pad + (v - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |v: f64| h - pad - (v - y0) / (y1 - y0) * (h - 2.0 * pad);
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#,
            h - pad,
            w - pad,
            h - pad,
            h - pad
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x}</text><text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})">{metric}</text>"#,
            w / 2.0,
            h - 12.0,
            h / 2.0,
            h / 2.0
        );
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
            let _ = writeln!(svg, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{v:.3}</text>"#, pad - 4.0);
        }
        for (v, xx) in [(x0, sx(x0)), (x1, sx(x1))] {
            let _ = writeln!(svg, r#"<text x="{xx:.1}" y="{}" text-anchor="middle" font-size="10">{v}</text>"#, h - pad + 14.0);
        }
        for (n, (name, mut points)) in lines.into_iter().enumerate() {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let color = colors[n % colors.len()];
            let path: Vec<String> = points.iter().map(|&(a, b)| format!("{:.1},{:.1}", sx(a), sy(b))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                path.join(" ")
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{series}={name}</text>"#,
                w - pad - 110.0,
                pad + 14.0 * n as f64
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
