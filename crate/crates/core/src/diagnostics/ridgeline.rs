//! Per-class kernel density curves with quartile bands, plus CSV/SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::class_name;

pub const GRID_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

/// Linear-interpolation quantile (`(n - 1) * q` positions) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1e-3 * mean.abs().max(1.0),
    };
    0.9 * spread * n.powf(-0.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDensity {
    pub label: usize,
    pub name: String,
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    /// Q1, Q2, Q3 of the raw values.
    pub quartiles: [f64; 3],
}

impl ClassDensity {
    /// 1..=4 by position of `v` relative to the quartiles.
    pub fn quartile_band(&self, v: f64) -> u8 {
        let [q1, q2, q3] = self.quartiles;
        if v <= q1 {
            1
        } else if v <= q2 {
            2
        } else if v <= q3 {
            3
        } else {
            4
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgelineSeries {
    pub feature: String,
    /// Top to bottom: ascending class code (sandbox first).
    pub classes: Vec<ClassDensity>,
}

/// Gaussian KDE of each class on a 256-point grid over `[min - 3h, max + 3h]`.
///
/// Each grid value is the kernel mass of the cell around the point divided by
/// the cell width, with cell edges at the midpoints between grid points (half
/// cells at both ends). The trapezoid integral over the grid then equals the
/// estimate's mass inside the grid span exactly, whatever the ratio of grid
/// spacing to bandwidth.
pub fn ridgeline_series(feature: &str, values_by_class: &BTreeMap<usize, Vec<f64>>, bandwidth: Bandwidth) -> Result<RidgelineSeries> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut classes = Vec::new();
    for (&label, values) in values_by_class {
        if values.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class_name(label),
                size: values.len(),
                needed: 2,
            });
        }
        let h = match bandwidth {
            Bandwidth::Silverman => silverman_bandwidth(values),
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => return Err(Error::InvalidHyperparam(format!("bandwidth must be positive, got {h}"))),
        };
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let x: Vec<f64> = (0..GRID_POINTS).map(|j| lo + step * j as f64).collect();
        let n = values.len() as f64;
        let density = (0..GRID_POINTS)
            .map(|j| {
                let left = if j == 0 { lo } else { x[j] - step / 2.0 };
                let right = if j == GRID_POINTS - 1 { hi } else { x[j] + step / 2.0 };
                let mass: f64 = values
                    .iter()
                    .map(|v| unit.cdf((right - v) / h) - unit.cdf((left - v) / h))
                    .sum();
                (mass / n / (right - left)).max(0.0)
            })
            .collect();
        classes.push(ClassDensity {
            label,
            name: class_name(label),
            bandwidth: h,
            x,
            density,
            quartiles: [
                quantile_sorted(&sorted, 0.25),
                quantile_sorted(&sorted, 0.5),
                quantile_sorted(&sorted, 0.75),
            ],
        });
    }
    Ok(RidgelineSeries {
        feature: feature.to_string(),
        classes,
    })
}

/// Trapezoid integral of a sampled curve.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / 2.0)
        .sum()
}

/// `feature,class,x,density,quartile_band` rows.
pub fn ridgeline_csv(series: &[RidgelineSeries]) -> String {
    let mut out = String::from("feature,class,x,density,quartile_band\n");
    for s in series {
        for c in &s.classes {
            for (x, d) in c.x.iter().zip(&c.density) {
                let _ = writeln!(out, "{},{},{},{},{}", s.feature, c.name, x, d, c.quartile_band(*x));
            }
        }
    }
    out
}

pub fn write_ridgeline_csv(path: impl AsRef<Path>, series: &[RidgelineSeries]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ridgeline_csv(series)).map_err(|e| Error::io(path, e))
}

const BAND_COLORS: [&str; 4] = ["#d7e9f7", "#9cc6e8", "#5b9bd1", "#2166ac"];

/// Stacked ridges, one per class, filled by quartile band.
pub fn ridgeline_svg(s: &RidgelineSeries) -> String {
    let (w, ridge_h, margin_l, margin_t) = (640.0, 90.0, 110.0, 30.0);
    let plot_w = w - margin_l - 20.0;
    let height = margin_t + ridge_h * (s.classes.len() as f64 + 0.6) + 30.0;
    let xmin = s.classes.iter().flat_map(|c| c.x.first()).copied().fold(f64::INFINITY, f64::min);
    let xmax = s.classes.iter().flat_map(|c| c.x.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let dmax = s
        .classes
        .iter()
        .flat_map(|c| c.density.iter())
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let px = |x: f64| margin_l + (x - xmin) / span * plot_w;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{height:.0}" viewBox="0 0 {w} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, w / 2.0, s.feature);
    for (row, c) in s.classes.iter().enumerate() {
        let base = margin_t + ridge_h * (row as f64 + 1.0);
        let py = |d: f64| base - d / dmax * ridge_h * 1.4;
        for band in 1..=4u8 {
            let idx: Vec<usize> = (0..c.x.len()).filter(|&j| c.quartile_band(c.x[j]) == band).collect();
            let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
                continue;
            };
            let mut pts = format!("{:.2},{:.2}", px(c.x[first]), base);
            for &j in &idx {
                let _ = write!(pts, " {:.2},{:.2}", px(c.x[j]), py(c.density[j]));
            }
            let _ = write!(pts, " {:.2},{:.2}", px(c.x[last]), base);
            let _ = writeln!(
                out,
                r#"<polygon points="{pts}" fill="{}" stroke="none"/>"#,
                BAND_COLORS[usize::from(band) - 1]
            );
        }
        let line: Vec<String> = c
            .x
            .iter()
            .zip(&c.density)
            .map(|(x, d)| format!("{:.2},{:.2}", px(*x), py(*d)))
            .collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#08306b" stroke-width="1"/>"##, line.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{base:.2}" text-anchor="end">{}</text>"#, margin_l - 8.0, c.name);
    }
    let axis_y = margin_t + ridge_h * (s.classes.len() as f64 + 0.3);
    let _ = writeln!(
        out,
        r#"<line x1="{margin_l}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="black"/>"#,
        margin_l + plot_w
    );
    for t in 0..=4 {
        let v = xmin + span * t as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(v),
            axis_y + 16.0,
            format_tick(v)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
