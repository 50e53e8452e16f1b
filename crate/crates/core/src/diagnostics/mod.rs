//! Exploratory statistics and ridgeline density series.

pub mod ridgeline;
pub mod shapiro;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use ridgeline::{ridgeline_series, ridgeline_svg, write_ridgeline_csv, Bandwidth, ClassDensity, RidgelineSeries};
pub use shapiro::{shapiro_wilk, ShapiroWilk};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::features::class_name;
use crate::learners::LearnerModel;

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanMatrix {
    pub rho: Matrix,
    /// Columns whose ranks are constant; their off-diagonal entries are 0.
    pub constant_columns: Vec<usize>,
}

pub fn spearman_matrix(x: &Matrix) -> Result<SpearmanMatrix> {
    if x.rows() < 2 {
        return Err(Error::EmptyInput("Spearman correlation needs at least two rows"));
    }
    let p = x.cols();
    let ranks: Vec<Vec<f64>> = (0..p).map(|j| average_ranks(&x.column(j))).collect();
    let constant_columns: Vec<usize> = (0..p).filter(|&j| ranks[j].iter().all(|r| *r == ranks[j][0])).collect();
    let mut rho = Matrix::zeros(p, p);
    for i in 0..p {
        rho.set(i, i, 1.0);
        for j in 0..i {
            let r = pearson(&ranks[i], &ranks[j]).unwrap_or(0.0);
            rho.set(i, j, r);
            rho.set(j, i, r);
        }
    }
    Ok(SpearmanMatrix { rho, constant_columns })
}

/// Log-determinant by LU with partial pivoting; `None` when singular.
fn log_det(a: &Matrix) -> Option<f64> {
    let n = a.rows();
    let mut m = a.clone();
    let scale = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m.get(i, c).abs().total_cmp(&m.get(j, c).abs()))?;
        let pv = m.get(piv, c);
        if pv.abs() <= 1e-12 * scale {
            return None;
        }
        if piv != c {
            for k in 0..n {
                let t = m.get(c, k);
                m.set(c, k, m.get(piv, k));
                m.set(piv, k, t);
            }
        }
        acc += pv.abs().ln();
        for r in c + 1..n {
            let f = m.get(r, c) / pv;
            for k in c..n {
                m.set(r, k, m.get(r, k) - f * m.get(c, k));
            }
        }
    }
    Some(acc)
}

fn covariance(rows: &[&[f64]]) -> Matrix {
    let n = rows.len();
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n as f64;
        }
    }
    let mut s = Matrix::zeros(p, p);
    for r in rows {
        for i in 0..p {
            for j in 0..=i {
                let v = s.get(i, j) + (r[i] - mean[i]) * (r[j] - mean[j]);
                s.set(i, j, v);
            }
        }
    }
    for i in 0..p {
        for j in 0..=i {
            let v = s.get(i, j) / (n as f64 - 1.0);
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxM {
    pub m: f64,
    pub chi_square: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Box's M test of equal class covariance matrices with the chi-square
/// approximation.
pub fn boxs_m(x: &Matrix, y: &[usize]) -> Result<BoxM> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    let p = x.cols();
    let mut groups: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        groups.entry(c).or_default().push(x.row(i));
    }
    let k = groups.len();
    if k < 2 || p == 0 {
        return Err(Error::Precondition("Box's M needs at least two classes and one feature".into()));
    }
    let n_total = y.len() as f64;
    let mut pooled = Matrix::zeros(p, p);
    let mut sum_log = 0.0;
    let mut sum_inv = 0.0;
    for (&c, rows) in &groups {
        if rows.len() <= p {
            return Err(Error::SingularCovariance(class_name(c)));
        }
        let s = covariance(rows);
        let dof = rows.len() as f64 - 1.0;
        let ld = log_det(&s).ok_or_else(|| Error::SingularCovariance(class_name(c)))?;
        sum_log += dof * ld;
        sum_inv += 1.0 / dof;
        for i in 0..p {
            for j in 0..p {
                pooled.set(i, j, pooled.get(i, j) + dof * s.get(i, j));
            }
        }
    }
    let dof_pooled = n_total - k as f64;
    for i in 0..p {
        for j in 0..p {
            pooled.set(i, j, pooled.get(i, j) / dof_pooled);
        }
    }
    let ld_pooled = log_det(&pooled).ok_or_else(|| Error::SingularCovariance("pooled".into()))?;
    // M is non-negative in exact arithmetic; clamp rounding noise
    let m = (dof_pooled * ld_pooled - sum_log).max(0.0);
    let pf = p as f64;
    let kf = k as f64;
    let c = (sum_inv - 1.0 / dof_pooled) * (2.0 * pf * pf + 3.0 * pf - 1.0) / (6.0 * (pf + 1.0) * (kf - 1.0));
    let chi_square = m * (1.0 - c);
    let df = pf * (pf + 1.0) * (kf - 1.0) / 2.0;
    let dist = ChiSquared::new(df).map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(BoxM {
        m,
        chi_square,
        df,
        p_value: 1.0 - dist.cdf(chi_square.max(0.0)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDependence {
    pub feature: usize,
    pub grid: Vec<f64>,
    pub classes: Vec<usize>,
    /// `curves[c][g]`: mean probability of class `classes[c]` at `grid[g]`.
    pub curves: Vec<Vec<f64>>,
}

/// Mean predicted class probabilities with `feature` forced to each value of a
/// quantile grid (`grid_points` evenly spaced quantiles of the column).
pub fn partial_dependence(model: &LearnerModel, x: &Matrix, feature: usize, grid_points: usize) -> Result<PartialDependence> {
    if x.cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: x.cols(),
        });
    }
    if feature >= x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            got: feature + 1,
        });
    }
    if x.is_empty() || grid_points == 0 {
        return Err(Error::EmptyInput("partial dependence needs rows and grid points"));
    }
    let mut col = x.column(feature);
    col.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (0..grid_points)
        .map(|g| {
            let q = if grid_points == 1 { 0.5 } else { g as f64 / (grid_points - 1) as f64 };
            ridgeline::quantile_sorted(&col, q)
        })
        .collect();
    let k = model.classes().len();
    let mut curves = vec![vec![0.0; grid_points]; k];
    let mut probe = x.clone();
    for (g, &v) in grid.iter().enumerate() {
        for i in 0..probe.rows() {
            probe.set(i, feature, v);
        }
        let proba = model
            .predict_proba(&probe)?
            .ok_or_else(|| Error::Precondition("partial dependence needs a probability-capable model".into()))?;
        for (c, curve) in curves.iter_mut().enumerate() {
            curve[g] = proba.column(c).iter().sum::<f64>() / x.rows() as f64;
        }
    }
    Ok(PartialDependence {
        feature,
        grid,
        classes: model.classes().to_vec(),
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormality {
    pub feature: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ShapiroWilk>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub features: Vec<String>,
    pub spearman: SpearmanMatrix,
    pub shapiro_wilk: Vec<FeatureNormality>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxs_m: Option<BoxM>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxs_m_note: Option<String>,
}

/// Spearman matrix, per-feature normality and Box's M on a labeled dataset.
/// Per-feature and Box's M failures are recorded as notes.
pub fn summarize(ds: &Dataset) -> Result<DiagnosticsSummary> {
    let spearman = spearman_matrix(&ds.x)?;
    let shapiro_wilk = (0..ds.n_features())
        .map(|j| {
            let (result, note) = match shapiro::shapiro_wilk(&ds.x.column(j)) {
                Ok(r) => (Some(r), None),
                Err(Error::ConstantColumn(_)) => (None, Some("constant column".to_string())),
                Err(e) => (None, Some(e.to_string())),
            };
            FeatureNormality {
                feature: ds.column_names[j].clone(),
                result,
                note,
            }
        })
        .collect();
    let (boxs_m, boxs_m_note) = match boxs_m(&ds.x, &ds.y) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DiagnosticsSummary {
        features: ds.column_names.clone(),
        spearman,
        shapiro_wilk,
        boxs_m,
        boxs_m_note,
    })
}

/// One ridgeline series per feature column of `ds`.
pub fn ridgelines(ds: &Dataset, bandwidth: Bandwidth) -> Result<Vec<RidgelineSeries>> {
    (0..ds.n_features())
        .map(|j| {
            let mut by_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (i, &c) in ds.y.iter().enumerate() {
                by_class.entry(c).or_default().push(ds.x.get(i, j));
            }
            ridgeline_series(&ds.column_names[j], &by_class, bandwidth)
        })
        .collect()
}
