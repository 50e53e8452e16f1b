//! Multinomial-deviance gradient boosting with regression-tree base learners.

use serde::{Deserialize, Serialize};

use super::tree::{encode_labels, normalize};
use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidHyperparam(m));
        if self.n_stages == 0 {
            return bad("n_stages must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return bad("min_samples_split must be >= 2 and min_samples_leaf >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegNode {
    pub value: f64,
    pub n_samples: usize,
    /// Sum of squared deviations from the node mean.
    pub sse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<super::tree::Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    fn leaf_for(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_for(row)].value
    }
}

fn sse(sum: f64, sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sq - sum * sum / n as f64).max(0.0)
    }
}

/// Variance-reduction tree on `r`, grown depth first.
fn fit_regression_tree(x: &Matrix, r: &[f64], hp: &BoostParams) -> RegressionTree {
    let mut tree = RegressionTree { nodes: Vec::new() };
    let all: Vec<usize> = (0..x.rows()).collect();
    build(x, r, hp, all, 0, &mut tree);
    tree
}

fn build(x: &Matrix, r: &[f64], hp: &BoostParams, samples: Vec<usize>, depth: usize, t: &mut RegressionTree) -> usize {
    let n = samples.len();
    let sum: f64 = samples.iter().map(|&s| r[s]).sum();
    let sq: f64 = samples.iter().map(|&s| r[s] * r[s]).sum();
    let node_sse = sse(sum, sq, n);
    t.nodes.push(RegNode {
        value: if n > 0 { sum / n as f64 } else { 0.0 },
        n_samples: n,
        sse: node_sse,
        split: None,
    });
    let id = t.nodes.len() - 1;
    if depth >= hp.max_depth || n < hp.min_samples_split || n < 2 * hp.min_samples_leaf || node_sse <= 1e-14 {
        return id;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = samples.clone();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let (mut ls, mut lq) = (0.0, 0.0);
        for p in 1..n {
            let v = r[order[p - 1]];
            ls += v;
            lq += v * v;
            let (lo, hi) = (x.get(order[p - 1], f), x.get(order[p], f));
            if lo >= hi || p < hp.min_samples_leaf || n - p < hp.min_samples_leaf {
                continue;
            }
            let gain = node_sse - sse(ls, lq, p) - sse(sum - ls, sq - lq, n - p);
            if best.is_none_or(|b| gain > b.0 + 1e-12) {
                let m = lo + (hi - lo) / 2.0;
                best = Some((gain, f, if m >= hi { lo } else { m }));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (ls, rs): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&s| x.get(s, feature) <= threshold);
    let left = build(x, r, hp, ls, depth + 1, t);
    let right = build(x, r, hp, rs, depth + 1, t);
    t.nodes[id].split = Some(super::tree::Split {
        feature,
        threshold,
        left,
        right,
    });
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostingModel {
    pub classes: Vec<usize>,
    /// Log class priors.
    pub init: Vec<f64>,
    /// `stages[m][k]` is the tree for class position `k` in round `m`.
    pub stages: Vec<Vec<RegressionTree>>,
    pub learning_rate: f64,
    pub hyperparams: BoostParams,
    pub n_features: usize,
}

pub fn softmax(raw: &[f64]) -> Vec<f64> {
    let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = raw.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Total multinomial deviance `-sum_i log softmax(F_i)[y_i]` for raw scores
/// `f` (rows x classes) and class positions `y`.
pub fn multinomial_deviance(f: &Matrix, y: &[usize]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &c)| {
            let row = f.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[c]
        })
        .sum()
}

/// Gradient of [`multinomial_deviance`] with respect to `f`: `softmax(F) - onehot(y)`.
pub fn deviance_gradient(f: &Matrix, y: &[usize]) -> Matrix {
    let mut g = Matrix::zeros(f.rows(), f.cols());
    for (i, &c) in y.iter().enumerate() {
        let p = softmax(f.row(i));
        for (k, pk) in p.into_iter().enumerate() {
            g.set(i, k, pk - f64::from(u8::from(k == c)));
        }
    }
    g
}

pub fn train_gradient_boosting(ds: &Dataset, hp: &BoostParams, _seed: u64) -> Result<GradientBoostingModel> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("gradient boosting needs at least one row"));
    }
    let (classes, y) = encode_labels(&ds.y);
    let k = classes.len();
    let n = ds.len();
    let mut counts = vec![0usize; k];
    for &c in &y {
        counts[c] += 1;
    }
    let init: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    let mut raw = Matrix::zeros(n, k);
    for i in 0..n {
        raw.row_mut(i).copy_from_slice(&init);
    }
    let mut stages = Vec::with_capacity(hp.n_stages);
    if k > 1 {
        for _ in 0..hp.n_stages {
            let probs: Vec<Vec<f64>> = (0..n).map(|i| softmax(raw.row(i))).collect();
            let mut round = Vec::with_capacity(k);
            for c in 0..k {
                let resid: Vec<f64> = (0..n)
                    .map(|i| f64::from(u8::from(y[i] == c)) - probs[i][c])
                    .collect();
                let mut tree = fit_regression_tree(&ds.x, &resid, hp);
                newton_leaves(&mut tree, &ds.x, &resid, &probs, c, k);
                for i in 0..n {
                    let v = raw.get(i, c) + hp.learning_rate * tree.predict_row(ds.x.row(i));
                    raw.set(i, c, v);
                }
                round.push(tree);
            }
            stages.push(round);
        }
    }
    Ok(GradientBoostingModel {
        classes,
        init,
        stages,
        learning_rate: hp.learning_rate,
        hyperparams: hp.clone(),
        n_features: ds.n_features(),
    })
}

/// Leaf value `(K-1)/K * sum(r) / sum(p(1-p))` over the rows reaching the leaf.
fn newton_leaves(tree: &mut RegressionTree, x: &Matrix, resid: &[f64], probs: &[Vec<f64>], c: usize, k: usize) {
    let mut num = vec![0.0; tree.nodes.len()];
    let mut den = vec![0.0; tree.nodes.len()];
    for i in 0..x.rows() {
        let leaf = tree.leaf_for(x.row(i));
        num[leaf] += resid[i];
        den[leaf] += probs[i][c] * (1.0 - probs[i][c]);
    }
    let scale = (k as f64 - 1.0) / k as f64;
    for (j, node) in tree.nodes.iter_mut().enumerate() {
        if node.split.is_none() {
            node.value = if den[j].abs() < 1e-150 { 0.0 } else { scale * num[j] / den[j] };
        }
    }
}

impl GradientBoostingModel {
    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    pub fn raw_scores_row(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for round in &self.stages {
            for (k, t) in round.iter().enumerate() {
                f[k] += self.learning_rate * t.predict_row(row);
            }
        }
        f
    }

    pub fn raw_scores(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.raw_scores_row(r));
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut raw = self.raw_scores(x)?;
        for i in 0..raw.rows() {
            let p = softmax(raw.row(i));
            raw.row_mut(i).copy_from_slice(&p);
        }
        Ok(raw)
    }

    /// Argmax of the raw scores; ties go to the lowest class code.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let raw = self.raw_scores(x)?;
        Ok(raw
            .iter_rows()
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

    /// Squared-error reduction per feature summed over all trees, normalized.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for t in self.stages.iter().flatten() {
            for node in &t.nodes {
                if let Some(s) = &node.split {
                    imp[s.feature] += node.sse - t.nodes[s.left].sse - t.nodes[s.right].sse;
                }
            }
        }
        normalize(imp)
    }

    /// Training deviance after each stage, for monitoring.
    pub fn staged_deviance(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.check(&ds.x)?;
        let y: Vec<usize> = ds
            .y
            .iter()
            .map(|c| self.classes.binary_search(c).map_err(|_| Error::UnknownLabel(*c)))
            .collect::<Result<_>>()?;
        let mut raw = Matrix::zeros(ds.len(), self.classes.len());
        for i in 0..ds.len() {
            raw.row_mut(i).copy_from_slice(&self.init);
        }
        let mut out = Vec::with_capacity(self.stages.len());
        for round in &self.stages {
            for (k, t) in round.iter().enumerate() {
                for i in 0..ds.len() {
                    let v = raw.get(i, k) + self.learning_rate * t.predict_row(ds.x.row(i));
                    raw.set(i, k, v);
                }
            }
            out.push(multinomial_deviance(&raw, &y));
        }
        Ok(out)
    }
}
