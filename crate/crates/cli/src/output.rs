//! CSV and SVG writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use regretlab_core::metrics::GapReport;
use regretlab_core::Trajectory;

use crate::error::{CliError, Result};

/// Full double precision: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// Grid indices written for a given stride; the last point is always kept.
pub fn sampled_rows(len: usize, stride: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if len > 0 && rows.last() != Some(&(len - 1)) {
        rows.push(len - 1);
    }
    rows
}

/// `t`, then per model `<name>.x_1 .. <name>.x_n, <name>.reward,
/// <name>.cum_reward, <name>.avg_reward`.
pub fn trajectory_csv(runs: &[(String, Trajectory)], stride: usize) -> String {
    let mut out = String::from("t");
    for (name, traj) in runs {
        let n = traj.strategies.first().map_or(0, Vec::len);
        for i in 1..=n {
            write!(out, ",{name}.x_{i}").unwrap();
        }
        write!(out, ",{name}.reward,{name}.cum_reward,{name}.avg_reward").unwrap();
    }
    out.push('\n');
    let Some((_, first)) = runs.first() else { return out };
    for k in sampled_rows(first.len(), stride) {
        out.push_str(&num(first.times[k]));
        for (_, traj) in runs {
            for x in &traj.strategies[k] {
                write!(out, ",{}", num(*x)).unwrap();
            }
            write!(
                out,
                ",{},{},{}",
                num(traj.rewards[k]),
                num(traj.cumulative[k]),
                num(traj.average[k])
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

/// `t`, then one `<a>-<b>` column of `cum_a − cum_b` per comparison.
pub fn gap_csv(gaps: &[(String, GapReport)], stride: usize) -> String {
    let mut out = String::from("t");
    for (label, _) in gaps {
        write!(out, ",{label}").unwrap();
    }
    out.push('\n');
    let Some((_, first)) = gaps.first() else { return out };
    for k in sampled_rows(first.times.len(), stride) {
        out.push_str(&num(first.times[k]));
        for (_, g) in gaps {
            write!(out, ",{}", num(g.gap[k])).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    } else {
        format!("{v:.1e}")
    }
}

impl LinePlot {
    /// Axes with five ticks each, one polyline per series and a legend.
    pub fn to_svg(&self) -> String {
        let (w, h) = (800.0, 500.0);
        let (left, right, top, bottom) = (80.0, 180.0, 40.0, 60.0);
        let (pw, ph) = (w - left - right, h - top - bottom);

        let finite = |v: &&f64| v.is_finite();
        let xs = self.series.iter().flat_map(|s| s.xs.iter()).filter(finite);
        let ys = self.series.iter().flat_map(|s| s.ys.iter()).filter(finite);
        let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            (x0, x1) = (x0 - 0.5, x1 + 0.5);
        }
        let pad = ((y1 - y0) * 0.05).max(1e-12);
        (y0, y1) = (y0 - pad, y1 + pad);
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut svg = String::new();
        writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(&self.title)).unwrap();
        writeln!(svg, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let (px, py) = (sx(fx), sy(fy));
            writeln!(svg, r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##, top + ph).unwrap();
            writeln!(svg, r##"<line x1="{left}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##, left + pw).unwrap();
            writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + ph + 18.0, tick_label(fx)).unwrap();
            writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, py + 4.0, tick_label(fy)).unwrap();
        }
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 15.0, escape(&self.x_label)).unwrap();
        writeln!(svg, r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#, top + ph / 2.0, escape(&self.y_label)).unwrap();

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<String> = s
                .xs
                .iter()
                .zip(&s.ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" ")).unwrap();
            let ly = top + 10.0 + 18.0 * i as f64;
            let lx = left + pw + 12.0;
            writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
            writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.name)).unwrap();
        }
        svg.push_str("</svg>\n");
        svg
    }
}
