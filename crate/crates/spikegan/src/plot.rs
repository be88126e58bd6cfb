//! Minimal SVG emission for run artifacts: loss curves, PCA scatter plots,
//! spike rasters, and grayscale image grids. The CSV files are the
//! authoritative record; these are quick-look renderings with no external
//! dependencies.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::snn::SpikeTrain;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

const SERIES_COLORS: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn svg_open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\"><rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\
         <text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"14\">{title}</text>",
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = xml_escape(title),
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return None;
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    Some((lo, hi))
}

/// Polyline chart of one or more named series over their index.
pub fn line_chart(title: &str, series: &[(&str, &[f64])]) -> Result<String> {
    if series.is_empty() || series.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::Usage("nothing to plot".into()));
    }
    let (lo, hi) = finite_bounds(series.iter().flat_map(|(_, v)| v.iter().copied()))
        .ok_or_else(|| Error::Usage("no finite values to plot".into()))?;
    let max_len = series.iter().map(|(_, v)| v.len()).max().unwrap().max(2);
    let x_of = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (max_len - 1) as f64;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut out = String::new();
    svg_open(&mut out, title);
    // axes
    let _ = write!(
        out,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\
         <text x=\"{m}\" y=\"{b2}\" font-family=\"sans-serif\" font-size=\"10\">0</text>\
         <text x=\"{r}\" y=\"{b2}\" text-anchor=\"end\" font-family=\"sans-serif\" \
         font-size=\"10\">{n}</text>\
         <text x=\"{m2}\" y=\"{b}\" text-anchor=\"end\" font-family=\"sans-serif\" \
         font-size=\"10\">{lo:.3}</text>\
         <text x=\"{m2}\" y=\"{t}\" text-anchor=\"end\" font-family=\"sans-serif\" \
         font-size=\"10\">{hi:.3}</text>",
        m = MARGIN,
        m2 = MARGIN - 4.0,
        b = HEIGHT - MARGIN,
        b2 = HEIGHT - MARGIN + 14.0,
        t = MARGIN,
        r = WIDTH - MARGIN,
        n = max_len - 1,
        lo = lo,
        hi = hi,
    );
    for (idx, (name, values)) in series.iter().enumerate() {
        let color = SERIES_COLORS[idx % SERIES_COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i), y_of(v)))
            .collect();
        let _ = write!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{pts}\"/>\
             <text x=\"{lx}\" y=\"{ly}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{name}</text>",
            color = color,
            pts = points.join(" "),
            lx = WIDTH - MARGIN - 120.0,
            ly = MARGIN + 16.0 * (idx + 1) as f64,
            name = xml_escape(name),
        );
    }
    out.push_str("</svg>");
    Ok(out)
}

/// Two labeled 2-D point clouds on shared axes; the standard view for PCA
/// projections of real vs. synthetic data.
pub fn scatter_2d(
    title: &str,
    real: &[Vec<f64>],
    synthetic: &[Vec<f64>],
) -> Result<String> {
    if real.is_empty() && synthetic.is_empty() {
        return Err(Error::Usage("nothing to plot".into()));
    }
    let all = real.iter().chain(synthetic);
    let (x_lo, x_hi) = finite_bounds(all.clone().map(|p| p[0]))
        .ok_or_else(|| Error::Usage("no finite values to plot".into()))?;
    let (y_lo, y_hi) = finite_bounds(all.map(|p| p[1])).unwrap();
    let x_of = |v: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * (v - x_lo) / (x_hi - x_lo);
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - y_lo) / (y_hi - y_lo);

    let mut out = String::new();
    svg_open(&mut out, title);
    for (points, color, label, ly) in [
        (real, "#1f77b4", "real", MARGIN + 16.0),
        (synthetic, "#d62728", "synthetic", MARGIN + 32.0),
    ] {
        for p in points {
            if p[0].is_finite() && p[1].is_finite() {
                let _ = write!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.6\"/>",
                    x_of(p[0]),
                    y_of(p[1]),
                    color
                );
            }
        }
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{}\">{}</text>",
            WIDTH - MARGIN - 80.0,
            ly,
            color,
            label
        );
    }
    out.push_str("</svg>");
    Ok(out)
}

/// Spike raster: one row per train, one tick mark per spike.
pub fn raster(title: &str, trains: &[SpikeTrain]) -> Result<String> {
    if trains.is_empty() {
        return Err(Error::Usage("nothing to plot".into()));
    }
    let rows: usize = trains.iter().map(|tr| tr.n_neurons).sum();
    let t = trains.iter().map(|tr| tr.t).max().unwrap().max(1);
    let row_h = ((HEIGHT - 2.0 * MARGIN) / rows as f64).min(14.0);
    let col_w = (WIDTH - 2.0 * MARGIN) / t as f64;

    let mut out = String::new();
    svg_open(&mut out, title);
    let mut row = 0usize;
    for (k, train) in trains.iter().enumerate() {
        for neuron in 0..train.n_neurons {
            let y = MARGIN + row as f64 * row_h;
            for (tau, &s) in train.row(neuron).iter().enumerate() {
                if s == 1 {
                    let x = MARGIN + tau as f64 * col_w;
                    let _ = write!(
                        out,
                        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                         fill=\"#222\"/>",
                        x,
                        y + 1.0,
                        (col_w - 1.0).max(0.5),
                        (row_h - 2.0).max(0.5)
                    );
                }
            }
            row += 1;
        }
        // separator between trains
        if k + 1 < trains.len() {
            let y = MARGIN + row as f64 * row_h;
            let _ = write!(
                out,
                "<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#ccc\"/>",
                MARGIN,
                y,
                WIDTH - MARGIN,
                y
            );
        }
    }
    out.push_str("</svg>");
    Ok(out)
}

/// Grid of square grayscale images (values in [0,1], row-major, side x side).
pub fn image_grid(title: &str, images: &[Vec<f64>], side: usize, columns: usize) -> Result<String> {
    if images.is_empty() || columns == 0 {
        return Err(Error::Usage("nothing to plot".into()));
    }
    for img in images {
        if img.len() != side * side {
            return Err(Error::Usage(format!(
                "image has {} pixels, expected {}",
                img.len(),
                side * side
            )));
        }
    }
    let gap = 6.0;
    let cell = ((WIDTH - 2.0 * MARGIN) / columns as f64 - gap).max(8.0);
    let px = cell / side as f64;
    let mut out = String::new();
    svg_open(&mut out, title);
    for (idx, img) in images.iter().enumerate() {
        let gx = MARGIN + (idx % columns) as f64 * (cell + gap);
        let gy = MARGIN + (idx / columns) as f64 * (cell + gap);
        for r in 0..side {
            for c in 0..side {
                let v = img[r * side + c].clamp(0.0, 1.0);
                let shade = (255.0 * (1.0 - v)).round() as u8;
                let _ = write!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                     fill=\"rgb({s},{s},{s})\"/>",
                    gx + c as f64 * px,
                    gy + r as f64 * px,
                    px + 0.1,
                    px + 0.1,
                    s = shade
                );
            }
        }
    }
    out.push_str("</svg>");
    Ok(out)
}
