//! RBF-kernel support vector classifier trained by SMO with second-order
//! working-set selection, one binary subproblem per class (one-vs-rest).

use serde::{Deserialize, Serialize};

use super::standardize::{fit_standardizer, standardize, Standardizer};
use super::tree::encode_labels;
use crate::dataset::{squared_distance, Dataset, Matrix};
use crate::error::{Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 100_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    KKT_TOLERANCE
}

fn default_max_iter() -> usize {
    MAX_ITERATIONS
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.1,
            tol: KKT_TOLERANCE,
            max_iter: MAX_ITERATIONS,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidHyperparam(format!("C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidHyperparam(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidHyperparam("tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One class against the rest. Decision value is
/// `sum_s dual_coef[s] * K(sv_s, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub class: usize,
    /// Training-row indices of the support vectors.
    pub support: Vec<usize>,
    pub support_vectors: Matrix,
    /// `alpha * y` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmRbfModel {
    pub subproblems: Vec<BinarySvm>,
    pub classes: Vec<usize>,
    pub hyperparams: SvmParams,
    pub standardizer: Standardizer,
    pub n_features: usize,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`.
fn smo(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize, subproblem: usize) -> Result<Solution> {
    let n = y.len();
    let kk = |i: usize, j: usize| k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iter = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * g[t] > gmax {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * g[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = kk(i, i) + kk(t, t) - 2.0 * kk(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NonConvergence {
                subproblem,
                iterations: iter,
            });
        }
        iter += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = kk(i, i) + kk(j, j) - 2.0 * kk(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += y[t] * y[i] * kk(t, i) * di + y[t] * y[j] * kk(t, j) * dj;
        }
    }

    // rho as in LIBSVM: mean of y*G over free vectors, else midpoint of bounds
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    Ok(Solution {
        alpha,
        bias: -rho,
        iterations: iter,
    })
}

fn kernel_matrix(x: &Matrix, gamma: f64) -> Vec<f64> {
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

pub fn train_svm_rbf(ds: &Dataset, hp: &SvmParams, _seed: u64) -> Result<SvmRbfModel> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("SVM needs at least one row"));
    }
    let standardizer = fit_standardizer(&ds.x)?;
    let z = standardize(&standardizer, &ds.x)?;
    let (classes, pos) = encode_labels(&ds.y);
    let k = kernel_matrix(&z, hp.gamma);
    let mut subproblems = Vec::new();
    if classes.len() > 1 {
        for (sp, &class) in classes.iter().enumerate() {
            let y: Vec<f64> = pos.iter().map(|&p| if p == sp { 1.0 } else { -1.0 }).collect();
            let sol = smo(&k, &y, hp.c, hp.tol, hp.max_iter, sp)?;
            let support: Vec<usize> = (0..y.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
            subproblems.push(BinarySvm {
                class,
                support_vectors: z.select_rows(&support),
                dual_coef: support.iter().map(|&t| sol.alpha[t] * y[t]).collect(),
                support,
                bias: sol.bias,
                iterations: sol.iterations,
            });
        }
    }
    Ok(SvmRbfModel {
        subproblems,
        classes,
        hyperparams: hp.clone(),
        standardizer,
        n_features: ds.n_features(),
    })
}

impl BinarySvm {
    fn decision_std(&self, gamma: f64, z: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(gamma, sv, z))
            .sum::<f64>()
            + self.bias
    }
}

impl SvmRbfModel {
    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// One column per class (in `classes` order) of one-vs-rest decision values.
    pub fn decision_function(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = Matrix::zeros(x.rows(), self.subproblems.len());
        for (i, row) in x.iter_rows().enumerate() {
            let z = self.standardizer.transform_row(row);
            for (k, sp) in self.subproblems.iter().enumerate() {
                out.set(i, k, sp.decision_std(self.hyperparams.gamma, &z));
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if self.subproblems.is_empty() {
            self.check(x)?;
            return Ok(vec![self.classes[0]; x.rows()]);
        }
        let d = self.decision_function(x)?;
        Ok(d.iter_rows()
            .map(|r| {
                let mut best = 0;
                for (i, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = i;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    /// Largest KKT violation `max(0, Gmax - Gmin)` over all subproblems on the
    /// training set `ds`.
    pub fn max_kkt_violation(&self, ds: &Dataset) -> Result<f64> {
        self.check(&ds.x)?;
        let z = standardize(&self.standardizer, &ds.x)?;
        let n = ds.len();
        let k = kernel_matrix(&z, self.hyperparams.gamma);
        let c = self.hyperparams.c;
        let mut worst: f64 = 0.0;
        for sp in &self.subproblems {
            let y: Vec<f64> = ds.y.iter().map(|&l| if l == sp.class { 1.0 } else { -1.0 }).collect();
            let mut alpha = vec![0.0; n];
            for (s, &t) in sp.support.iter().enumerate() {
                alpha[t] = sp.dual_coef[s] * y[t];
            }
            let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
            for t in 0..n {
                let g: f64 = (0..n).map(|s| y[t] * y[s] * k[t * n + s] * alpha[s]).sum::<f64>() - 1.0;
                let v = -y[t] * g;
                if (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0) {
                    gmax = gmax.max(v);
                }
                if (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c) {
                    gmin = gmin.min(v);
                }
            }
            if gmax.is_finite() && gmin.is_finite() {
                worst = worst.max(gmax - gmin);
            }
        }
        Ok(worst)
    }
}
