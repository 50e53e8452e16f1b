//! CART classification trees with Gini impurity and cost-complexity pruning.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other limits stop it.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// `None` means unbounded.
    pub max_leaf_nodes: Option<usize>,
    pub ccp_alpha: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_leaf_nodes: None,
            ccp_alpha: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidHyperparam(m));
        if self.max_depth == Some(0) {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_samples_split < 2 {
            return bad(format!("min_samples_split must be >= 2, got {}", self.min_samples_split));
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        if let Some(m) = self.max_leaf_nodes {
            if m < 2 {
                return bad(format!("max_leaf_nodes must be >= 2, got {m}"));
            }
        }
        if !(self.ccp_alpha >= 0.0 && self.ccp_alpha.is_finite()) {
            return bad(format!("ccp_alpha must be finite and >= 0, got {}", self.ccp_alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub impurity: f64,
    pub n_samples: usize,
    /// Indexed like the owning model's `classes`.
    pub class_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub hyperparams: TreeParams,
    pub classes: Vec<usize>,
    pub n_features: usize,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub feature: usize,
    pub threshold: f64,
    /// Impurity decrease `imp - wL*impL - wR*impR` (unweighted by node size).
    pub gain: f64,
}

/// Midpoint between two consecutive distinct values, kept strictly below `hi`
/// so that `x <= threshold` separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Best Gini split of `samples` over `features` (scanned in the given order).
/// Zero-gain splits are admissible. Ties keep the earlier feature, then the
/// lower threshold.
pub(crate) fn best_split(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let n = samples.len();
    if n < 2 * min_leaf || n < 2 {
        return None;
    }
    let mut total = vec![0usize; n_classes];
    for &s in samples {
        total[y[s]] += 1;
    }
    let parent = gini(&total);
    let mut best: Option<Candidate> = None;
    let mut order = samples.to_vec();
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&total);
        for p in 1..n {
            let moved = y[order[p - 1]];
            left[moved] += 1;
            right[moved] -= 1;
            let (lo, hi) = (x.get(order[p - 1], f), x.get(order[p], f));
            if lo >= hi || p < min_leaf || n - p < min_leaf {
                continue;
            }
            let wl = p as f64 / n as f64;
            let gain = parent - wl * gini(&left) - (1.0 - wl) * gini(&right);
            if best.is_none_or(|b| gain > b.gain + 1e-12) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

/// Per-split feature subsampling used by random forests.
pub(crate) struct FeatureSampler<'a> {
    pub per_split: usize,
    pub rng: &'a mut ChaCha8Rng,
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
    split: Option<Candidate>,
}

/// Grows a tree on `samples` (row indices into `x`, repeats allowed) where
/// `y` holds positions into `classes`.
pub(crate) fn grow(
    x: &Matrix,
    y: &[usize],
    classes: &[usize],
    samples: Vec<usize>,
    params: &TreeParams,
    mut sampler: Option<FeatureSampler<'_>>,
) -> DecisionTreeModel {
    let k = classes.len();
    let p = x.cols();
    let all_features: Vec<usize> = (0..p).collect();
    let choose = |s: &[usize], depth: usize, sampler: &mut Option<FeatureSampler<'_>>| {
        let counts = counts_of(y, k, s);
        let can_split = s.len() >= params.min_samples_split
            && params.max_depth.is_none_or(|d| depth < d)
            && gini(&counts) > 0.0;
        if !can_split {
            return None;
        }
        match sampler {
            Some(fs) if fs.per_split < p => {
                let mut feats: Vec<usize> = sample(fs.rng, p, fs.per_split).into_vec();
                feats.sort_unstable();
                best_split(x, y, k, s, &feats, params.min_samples_leaf)
            }
            _ => best_split(x, y, k, s, &all_features, params.min_samples_leaf),
        }
    };

    let root_counts = counts_of(y, k, &samples);
    let mut nodes = vec![TreeNode {
        impurity: gini(&root_counts),
        n_samples: samples.len(),
        class_counts: root_counts,
        split: None,
    }];
    let root_split = choose(&samples, 0, &mut sampler);
    let mut frontier = vec![Pending {
        node: 0,
        samples,
        depth: 0,
        split: root_split,
    }];
    let mut leaves = 1usize;

    loop {
        if params.max_leaf_nodes.is_some_and(|m| leaves >= m) {
            break;
        }
        // Best-first when a leaf budget applies, otherwise creation order.
        let pick = if params.max_leaf_nodes.is_some() {
            frontier
                .iter()
                .enumerate()
                .filter_map(|(i, f)| {
                    f.split
                        .map(|c| (i, c.gain * f.samples.len() as f64, f.node))
                })
                .fold(None, |acc: Option<(usize, f64, usize)>, cur| match acc {
                    Some(a) if a.1 > cur.1 + 1e-12 || (a.1 >= cur.1 - 1e-12 && a.2 < cur.2) => {
                        Some(a)
                    }
                    _ => Some(cur),
                })
                .map(|(i, _, _)| i)
        } else {
            frontier.iter().position(|f| f.split.is_some())
        };
        let Some(idx) = pick else { break };
        let item = frontier.remove(idx);
        let cand = item.split.expect("picked entries carry a split");
        let (ls, rs): (Vec<usize>, Vec<usize>) = item
            .samples
            .iter()
            .partition(|&&s| x.get(s, cand.feature) <= cand.threshold);
        let mut child = |s: Vec<usize>, nodes: &mut Vec<TreeNode>| {
            let counts = counts_of(y, k, &s);
            nodes.push(TreeNode {
                impurity: gini(&counts),
                n_samples: s.len(),
                class_counts: counts,
                split: None,
            });
            let id = nodes.len() - 1;
            let split = choose(&s, item.depth + 1, &mut sampler);
            Pending {
                node: id,
                samples: s,
                depth: item.depth + 1,
                split,
            }
        };
        let l = child(ls, &mut nodes);
        let r = child(rs, &mut nodes);
        nodes[item.node].split = Some(Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: l.node,
            right: r.node,
        });
        frontier.push(l);
        frontier.push(r);
        leaves += 1;
    }

    DecisionTreeModel {
        nodes,
        hyperparams: params.clone(),
        classes: classes.to_vec(),
        n_features: p,
    }
}

fn counts_of(y: &[usize], k: usize, samples: &[usize]) -> Vec<usize> {
    let mut c = vec![0usize; k];
    for &s in samples {
        c[y[s]] += 1;
    }
    c
}

/// Maps labels to positions in the sorted class list.
pub(crate) fn encode_labels(y: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let classes: Vec<usize> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let pos = y
        .iter()
        .map(|v| classes.binary_search(v).expect("label collected above"))
        .collect();
    (classes, pos)
}

pub fn train_decision_tree(ds: &Dataset, hp: &TreeParams, _seed: u64) -> Result<DecisionTreeModel> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("decision tree needs at least one row"));
    }
    let (classes, y) = encode_labels(&ds.y);
    let tree = grow(&ds.x, &y, &classes, (0..ds.len()).collect(), hp, None);
    Ok(prune_cost_complexity(&tree, hp.ccp_alpha))
}

impl DecisionTreeModel {
    pub fn n_leaves(&self) -> usize {
        self.reachable().into_iter().filter(|&i| self.nodes[i].is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTreeModel, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some(s) = &self.nodes[i].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        out
    }

    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Majority class of the reached leaf; ties go to the lowest class code.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let counts = &self.nodes[self.leaf_for(row)].class_counts;
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check(x)?;
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let leaf = &self.nodes[self.leaf_for(row)];
        let n = leaf.n_samples.max(1) as f64;
        leaf.class_counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.proba_row(r)).collect();
        let mut m = Matrix::from_rows(&rows)?;
        if rows.is_empty() {
            m = Matrix::zeros(0, self.classes.len());
        }
        Ok(m)
    }

    /// Sample-weighted Gini decrease per feature before normalization.
    pub(crate) fn raw_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        let total = self.nodes[0].n_samples.max(1) as f64;
        for i in self.reachable() {
            let node = &self.nodes[i];
            if let Some(s) = &node.split {
                let (l, r) = (&self.nodes[s.left], &self.nodes[s.right]);
                let dec = node.n_samples as f64 * node.impurity
                    - l.n_samples as f64 * l.impurity
                    - r.n_samples as f64 * r.impurity;
                imp[s.feature] += dec / total;
            }
        }
        imp
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        normalize(self.raw_importance())
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Weakest-link pruning: collapses the internal node with the smallest
/// effective alpha while that alpha is at most `alpha`. `alpha == 0` leaves the
/// tree unchanged.
pub fn prune_cost_complexity(tree: &DecisionTreeModel, alpha: f64) -> DecisionTreeModel {
    if alpha <= 0.0 || tree.nodes.is_empty() {
        return tree.clone();
    }
    let mut t = tree.clone();
    let total = t.nodes[0].n_samples.max(1) as f64;
    let risk = |n: &TreeNode| n.n_samples as f64 / total * n.impurity;
    loop {
        // (leaf risk sum, leaf count) for every reachable subtree, children first
        let order = t.reachable();
        let mut agg = vec![(0.0, 0usize); t.nodes.len()];
        for &i in order.iter().rev() {
            agg[i] = match &t.nodes[i].split {
                None => (risk(&t.nodes[i]), 1),
                Some(s) => (agg[s.left].0 + agg[s.right].0, agg[s.left].1 + agg[s.right].1),
            };
        }
        let mut weakest: Option<(f64, usize)> = None;
        for &i in &order {
            if t.nodes[i].is_leaf() {
                continue;
            }
            let (r_sub, leaves) = agg[i];
            let a = (risk(&t.nodes[i]) - r_sub) / (leaves as f64 - 1.0);
            if weakest.is_none_or(|(b, _)| a < b) {
                weakest = Some((a, i));
            }
        }
        match weakest {
            Some((a, i)) if a <= alpha => t.nodes[i].split = None,
            _ => break,
        }
    }
    compact(t)
}

/// Drops unreachable nodes and renumbers the rest in pre-order.
fn compact(t: DecisionTreeModel) -> DecisionTreeModel {
    let order = t.reachable();
    let mut new_id = vec![usize::MAX; t.nodes.len()];
    for (n, &i) in order.iter().enumerate() {
        new_id[i] = n;
    }
    let nodes = order
        .iter()
        .map(|&i| {
            let mut node = t.nodes[i].clone();
            if let Some(s) = node.split.as_mut() {
                s.left = new_id[s.left];
                s.right = new_id[s.right];
            }
            node
        })
        .collect();
    DecisionTreeModel { nodes, ..t }
}
