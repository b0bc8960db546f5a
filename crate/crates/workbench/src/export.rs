//! CSV and SVG output of a run.

use std::fmt::Write as _;
use std::path::Path;

use predfeed_core::trajectory::Trajectory;

use crate::error::{Result, WorkbenchError};
use crate::scenario::PlotChannel;

/// Columnar view of a run, in CSV order:
/// `t, x1..xn, u1..um, delta[, phat1..phatn][, diagnostics..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let (n, m, len) = (traj.n, traj.m, traj.len());
        let mut header = vec!["t".to_string()];
        let mut columns = vec![traj.time.clone()];
        for i in 0..n {
            header.push(format!("x{}", i + 1));
            columns.push((0..len).map(|k| traj.x(k)[i]).collect());
        }
        for j in 0..m {
            header.push(format!("u{}", j + 1));
            columns.push((0..len).map(|k| traj.u(k)[j]).collect());
        }
        header.push("delta".into());
        columns.push(traj.delta.clone());
        if traj.predictor.is_some() {
            for i in 0..n {
                header.push(format!("phat{}", i + 1));
                columns.push((0..len).map(|k| traj.phat(k).unwrap()[i]).collect());
            }
        }
        for (name, v) in &traj.diagnostics {
            header.push(name.clone());
            columns.push(v.clone());
        }
        Self { header, columns }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    /// Number of `x*` columns.
    pub fn state_dim(&self) -> usize {
        self.header
            .iter()
            .filter(|h| h.starts_with('x') && h[1..].parse::<usize>().is_ok())
            .count()
    }

    pub fn state(&self, k: usize) -> Vec<f64> {
        (1..=self.state_dim())
            .map(|i| self.column(&format!("x{i}")).unwrap()[k])
            .collect()
    }
}

/// 17 significant digits: parses back to the same bits.
fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| WorkbenchError::csv(path, e))?;
    w.write_record(&table.header)
        .map_err(|e| WorkbenchError::csv(path, e))?;
    let mut row = Vec::with_capacity(table.columns.len());
    for k in 0..table.rows() {
        row.clear();
        row.extend(table.columns.iter().map(|c| fmt_value(c[k])));
        w.write_record(&row).map_err(|e| WorkbenchError::csv(path, e))?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))
}

pub fn export_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_csv(&Table::from_trajectory(traj), path)
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| WorkbenchError::csv(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| WorkbenchError::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(WorkbenchError::Config(format!(
            "{}: first column must be `t`",
            path.display()
        )));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| WorkbenchError::csv(path, e))?;
        for (i, field) in rec.iter().enumerate() {
            let v = field.trim().parse::<f64>().map_err(|_| {
                WorkbenchError::Config(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    line + 2
                ))
            })?;
            columns[i].push(v);
        }
    }
    Ok(Table { header, columns })
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MAX_POINTS: usize = 2000;

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line chart of the requested channels against `t`, one self-contained
/// SVG file. An empty channel list writes nothing.
pub fn export_plot(table: &Table, title: &str, channels: &[PlotChannel], path: &Path) -> Result<()> {
    if channels.is_empty() {
        return Ok(());
    }
    let t = table
        .column("t")
        .ok_or_else(|| WorkbenchError::Config("table has no `t` column".into()))?;
    let mut series = Vec::new();
    for ch in channels {
        let col = table
            .column(&ch.column)
            .ok_or_else(|| WorkbenchError::Config(format!("plot channel `{}`: no column `{}`", ch.label, ch.column)))?;
        series.push((ch, col.iter().map(|v| v + ch.offset).collect::<Vec<f64>>()));
    }
    let finite = |v: &&f64| v.is_finite();
    let (t_lo, t_hi) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let mut y_lo = series
        .iter()
        .flat_map(|s| s.1.iter().filter(finite))
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut y_hi = series
        .iter()
        .flat_map(|s| s.1.iter().filter(finite))
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        (y_lo, y_hi) = (-1.0, 1.0);
    }
    if y_hi - y_lo < 1e-12 {
        (y_lo, y_hi) = (y_lo - 0.5, y_hi + 0.5);
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let t_span = if t_hi > t_lo { t_hi - t_lo } else { 1.0 };

    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let sx = |v: f64| ml + (v - t_lo) / t_span * pw;
    let sy = |v: f64| mt + (y_hi - v) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for v in nice_ticks(t_lo, t_hi, 8) {
        let x = sx(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            mt + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph + 16.0,
            tick_label(v)
        );
    }
    for v in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            ml + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t [s]</text>"#,
        ml + pw / 2.0,
        HEIGHT - 12.0
    );

    let stride = t.len().div_ceil(MAX_POINTS).max(1);
    for (i, (ch, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        let last = t.len().saturating_sub(1);
        for k in (0..t.len())
            .step_by(stride)
            .chain(std::iter::once(last).filter(|l| l % stride != 0))
        {
            if ys[k].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(t[k]), sy(ys[k]));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = mt + 16.0 + 16.0 * i as f64;
        let lx = ml + pw - 110.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ch.label)
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| WorkbenchError::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
