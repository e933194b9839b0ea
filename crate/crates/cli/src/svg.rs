//! Static SVG line charts drawn from CSV text.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0);
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Chart<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub ys: &'a [&'a str],
    /// Plot `log10` of the values; nonpositive values are dropped.
    pub log_y: bool,
}

fn columns(csv_text: &str, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|n| headers.iter().position(|h| h == *n).with_context(|| format!("column '{n}' not in CSV")))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record?;
        for (col, &k) in out.iter_mut().zip(&index) {
            col.push(record.get(k).and_then(|s| s.trim().parse().ok()).unwrap_or(f64::NAN));
        }
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        return Some((lo - 0.5, hi + 0.5));
    }
    Some((lo, hi))
}

/// Renders the chart. The output depends only on `csv_text` and `chart`.
pub fn line_chart(csv_text: &str, chart: &Chart) -> Result<String> {
    let mut names = vec![chart.x];
    names.extend_from_slice(chart.ys);
    let mut cols = columns(csv_text, &names)?;
    let xs = cols.remove(0);
    if chart.log_y {
        for col in &mut cols {
            col.iter_mut().for_each(|v| *v = if *v > 0.0 { v.log10() } else { f64::NAN });
        }
    }
    let Some((x0, x1)) = bounds(xs.iter().cloned()) else { bail!("no finite values in column '{}'", chart.x) };
    let Some((y0, y1)) = bounds(cols.iter().flatten().cloned()) else { bail!("no finite values to plot") };
    let (left, right, top, bottom) = MARGIN;
    let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(chart.title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(s, r#"<line x1="{gx:.2}" y1="{}" x2="{gx:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{gx:.2}" y="{}" text-anchor="middle">{xv:.3}</text>"#, top + ph + 18.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{gy:.2}" x2="{left}" y2="{gy:.2}" stroke="black"/>"#, left - 5.0);
        let label = if chart.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 8.0, gy + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, HEIGHT - 8.0, escape(chart.x));

    for (k, (col, name)) in cols.iter().zip(chart.ys).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, s: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, segment.join(" "));
            }
            segment.clear();
        };
        for (x, y) in xs.iter().zip(col) {
            if x.is_finite() && y.is_finite() {
                segment.push(format!("{:.2},{:.2}", px(*x), py(*y)));
            } else {
                flush(&mut segment, &mut s);
            }
        }
        flush(&mut segment, &mut s);
        let ly = top + 16.0 + 16.0 * k as f64;
        let lx = left + pw - 150.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
