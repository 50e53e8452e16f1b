//! Isolation Forest scoring and per-class outlier removal.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::features::{class_name, LifecycleStage};

pub const DEFAULT_TREES: usize = 100;
pub const MAX_SUBSAMPLE: usize = 256;

/// Average path length of an unsuccessful binary-search-tree lookup over `n` points.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    let n = n as f64;
    2.0 * harmonic - 2.0 * (n - 1.0) / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IsolationNode {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<IsolationNode>,
}

impl IsolationTree {
    fn build(x: &Matrix, rows: Vec<usize>, max_depth: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow(x, rows, 0, max_depth, rng);
        tree
    }

    fn grow(
        &mut self,
        x: &Matrix,
        rows: Vec<usize>,
        depth: usize,
        max_depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IsolationNode::Leaf { size: rows.len() });
        if rows.len() <= 1 || depth >= max_depth {
            return id;
        }
        // Columns with a non-degenerate range on this slice.
        let ranges: Vec<(usize, f64, f64)> = (0..x.cols())
            .filter_map(|j| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = x.get(i, j);
                    (lo.min(v), hi.max(v))
                });
                (lo < hi).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = loop {
            let v = lo + (hi - lo) * rng.random::<f64>();
            if v > lo && v < hi {
                break v;
            }
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| x.get(i, feature) < value);
        let left = self.grow(x, left_rows, depth + 1, max_depth, rng);
        let right = self.grow(x, right_rows, depth + 1, max_depth, rng);
        self.nodes[id] = IsolationNode::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }

    /// Path length of `row`, extended at the leaf by the expected remaining depth.
    pub fn path_length(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[node] {
                IsolationNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *value { *left } else { *right };
                    depth += 1.0;
                }
                IsolationNode::Leaf { size } => return depth + average_path_length(*size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[IsolationNode], i: usize) -> usize {
            match &nodes[i] {
                IsolationNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
                IsolationNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub n_trees: usize,
    pub normalizer: f64,
    pub n_features: usize,
}

/// Fits `n_trees` isolation trees, each on a seeded subsample of `subsample` rows
/// drawn without replacement. Tree `t` uses ChaCha8 stream `t` of `seed`, so the
/// result does not depend on build order.
pub fn fit_isolation_forest(
    x: &Matrix,
    n_trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<IsolationForestModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("isolation forest needs at least one row"));
    }
    if n_trees == 0 {
        return Err(Error::InvalidHyperparam("n_trees must be at least 1".into()));
    }
    let psi = subsample.clamp(1, x.rows());
    let max_depth = (psi as f64).log2().ceil() as usize;
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows = sample(&mut rng, x.rows(), psi).into_vec();
            IsolationTree::build(x, rows, max_depth, &mut rng)
        })
        .collect();
    Ok(IsolationForestModel {
        trees,
        subsample_size: psi,
        n_trees,
        normalizer: average_path_length(psi),
        n_features: x.cols(),
    })
}

/// `2^(-E[h(x)] / c(psi))`; 0.5 when the normalizer is degenerate.
pub fn anomaly_score(model: &IsolationForestModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    if model.normalizer <= 0.0 {
        return Ok(0.5);
    }
    let mean: f64 =
        model.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / model.trees.len() as f64;
    Ok(2f64.powf(-mean / model.normalizer))
}

pub fn score_rows(model: &IsolationForestModel, x: &Matrix) -> Result<Vec<f64>> {
    x.iter_rows().map(|r| anomaly_score(model, r)).collect()
}

/// Per-class contamination fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub fractions: BTreeMap<LifecycleStage, f64>,
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        Self {
            fractions: BTreeMap::from([
                (LifecycleStage::Graduated, 0.01),
                (LifecycleStage::Incubating, 0.05),
                (LifecycleStage::Sandbox, 0.10),
            ]),
        }
    }
}

impl ContaminationSpec {
    pub fn uniform(f: f64) -> Self {
        Self {
            fractions: LifecycleStage::ALL.iter().map(|s| (*s, f)).collect(),
        }
    }

    pub fn fraction(&self, class: usize) -> f64 {
        LifecycleStage::from_code(class)
            .and_then(|s| self.fractions.get(&s).copied())
            .unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (s, f) in &self.fractions {
            if !(0.0..1.0).contains(f) {
                return Err(Error::Config(format!(
                    "contamination for {s} must lie in [0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Number of rows dropped from a class of `n` rows at fraction `f`.
pub fn removal_count(f: f64, n: usize) -> usize {
    // The epsilon absorbs products like 0.07 * 100 = 7.000000000000001 landing low.
    (f * n as f64 + 1e-9).floor() as usize
}

/// Drops, within each class, the `floor(f * n_class)` rows with the highest
/// anomaly score under a forest fit on that class alone. Among equal scores
/// the lower row index is kept. Surviving rows keep their original order.
pub fn filter_class_outliers(
    ds: &Dataset,
    spec: &ContaminationSpec,
    n_trees: usize,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    if let Some(i) = ds.y.iter().position(|&c| LifecycleStage::from_code(c).is_none()) {
        return Err(Error::UnlabeledRow(ds.row_ids[i].clone()));
    }
    let mut keep = vec![true; ds.len()];
    for class in ds.classes() {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == class).collect();
        let drop = removal_count(spec.fraction(class), idx.len());
        if drop == 0 {
            continue;
        }
        let x = ds.x.select_rows(&idx);
        let forest = fit_isolation_forest(&x, n_trees, MAX_SUBSAMPLE, seed ^ ((class as u64) << 32))?;
        let scores = score_rows(&forest, &x)?;
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(b.cmp(&a)));
        for &o in order.iter().take(drop) {
            keep[idx[o]] = false;
        }
        log::debug!(
            "outliers: class {} dropped {drop} of {} rows",
            class_name(class),
            idx.len()
        );
    }
    let kept: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    Ok(ds.subset(&kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blob(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
            .collect()
    }

    #[test]
    fn normalizer_matches_closed_form() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2*(1 + 1/2) - 2*2/3
        assert!((average_path_length(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn single_row_scores_half() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let m = fit_isolation_forest(&x, 10, 256, 3).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(anomaly_score(&m, &[1.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn deterministic_for_seed() {
        let x = Matrix::from_rows(&blob(64, 1)).unwrap();
        let a = fit_isolation_forest(&x, 20, 32, 9).unwrap();
        let b = fit_isolation_forest(&x, 20, 32, 9).unwrap();
        assert_eq!(a, b);
        let c = fit_isolation_forest(&x, 20, 32, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn depth_and_node_bounds() {
        let x = Matrix::from_rows(&blob(300, 2)).unwrap();
        let m = fit_isolation_forest(&x, 30, 256, 4).unwrap();
        assert_eq!(m.subsample_size, 256);
        for t in &m.trees {
            assert!(t.depth() <= 8);
            assert!(t.nodes.len() < 2 * 256);
        }
    }

    #[test]
    fn planted_outlier_and_cluster_interior() {
        let mut pts = blob(100, 5);
        pts.push([10.0, 10.0]);
        let x = Matrix::from_rows(&pts).unwrap();
        let m = fit_isolation_forest(&x, 100, 256, 11).unwrap();
        let scores = score_rows(&m, &x).unwrap();
        let top = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(top, 100);
        assert!(scores[100] > 0.6);
        assert!(anomaly_score(&m, &[0.0, 0.0]).unwrap() < 0.5);
        // duplicate row traverses identically
        let dup = anomaly_score(&m, x.row(3)).unwrap();
        assert!((dup - scores[3]).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let x = Matrix::from_rows(&blob(10, 1)).unwrap();
        let m = fit_isolation_forest(&x, 5, 8, 1).unwrap();
        assert!(matches!(anomaly_score(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn removal_counts_floor() {
        assert_eq!(removal_count(0.10, 101), 10);
        assert_eq!(removal_count(0.01, 22), 0);
        assert_eq!(removal_count(0.05, 31), 1);
        assert_eq!(removal_count(0.07, 100), 7);
    }

    #[test]
    fn zero_contamination_is_identity() {
        let pts = blob(30, 3);
        let y = (0..30).map(|i| i % 3).collect();
        let ds = Dataset::from_rows(&pts, y).unwrap();
        let out = filter_class_outliers(&ds, &ContaminationSpec::uniform(0.0), 50, 1).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn unlabeled_code_rejected() {
        let ds = Dataset::from_rows(&[[0.0], [1.0]], vec![0, 7]).unwrap();
        assert!(matches!(
            filter_class_outliers(&ds, &ContaminationSpec::default(), 10, 1),
            Err(Error::UnlabeledRow(_))
        ));
    }
}
