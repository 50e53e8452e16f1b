//! Dense row-major matrices and labeled datasets shared by every learning stage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch(data.len(), rows * cols));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. An empty slice yields a `0 x cols` matrix
    /// only through [`Matrix::zeros`]; here it yields `0 x 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }
}

/// Labeled feature rows. Labels are small integer class codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<usize>,
        column_names: Vec<String>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch(x.rows(), y.len()));
        }
        if x.rows() != row_ids.len() {
            return Err(Error::LengthMismatch(x.rows(), row_ids.len()));
        }
        if x.rows() > 0 && x.cols() != column_names.len() {
            return Err(Error::DimensionMismatch {
                expected: column_names.len(),
                got: x.cols(),
            });
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self {
            x,
            y,
            column_names,
            row_ids,
        })
    }

    /// Convenience constructor for tests and fixtures: ids are `row{i}` and
    /// columns `f{j}`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], y: Vec<usize>) -> Result<Self> {
        let x = Matrix::from_rows(rows)?;
        let column_names = (0..x.cols()).map(|j| format!("f{j}")).collect();
        let row_ids = (0..x.rows()).map(|i| format!("row{i}")).collect();
        Self::new(x, y, column_names, row_ids)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &c in &self.y {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }

    /// Distinct class codes in ascending order.
    pub fn classes(&self) -> Vec<usize> {
        self.class_counts().into_keys().collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            column_names: self.column_names.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
