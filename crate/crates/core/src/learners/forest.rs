use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{encode_labels, grow, normalize, DecisionTreeModel, FeatureSampler, TreeParams};
use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(p)))` candidate features per split.
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn per_split(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_leaf_nodes: None,
            ccp_alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidHyperparam("n_trees must be at least 1".into()));
        }
        self.tree_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_trees: usize,
    pub hyperparams: ForestParams,
    /// Tree `t` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `t`.
    pub seed: u64,
    pub classes: Vec<usize>,
    pub n_features: usize,
}

pub fn train_random_forest(ds: &Dataset, hp: &ForestParams, seed: u64) -> Result<RandomForestModel> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("random forest needs at least one row"));
    }
    let (classes, y) = encode_labels(&ds.y);
    let n = ds.len();
    let tp = hp.tree_params();
    let per_split = hp.max_features.per_split(ds.n_features());
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let samples: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(
                &ds.x,
                &y,
                &classes,
                samples,
                &tp,
                Some(FeatureSampler {
                    per_split,
                    rng: &mut rng,
                }),
            )
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_trees: hp.n_trees,
        hyperparams: hp.clone(),
        seed,
        classes,
        n_features: ds.n_features(),
    })
}

impl RandomForestModel {
    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    fn votes(&self, row: &[f64]) -> Vec<usize> {
        let mut v = vec![0usize; self.classes.len()];
        for t in &self.trees {
            let label = t.predict_row(row);
            let pos = self.classes.binary_search(&label).expect("trees share the class list");
            v[pos] += 1;
        }
        v
    }

    /// Majority vote over member trees; ties go to the lowest class code.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check(x)?;
        Ok(x.iter_rows()
            .map(|r| {
                let v = self.votes(r);
                let mut best = 0;
                for (i, &c) in v.iter().enumerate() {
                    if c > v[best] {
                        best = i;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    /// Vote fractions.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        for (i, r) in x.iter_rows().enumerate() {
            for (j, c) in self.votes(r).into_iter().enumerate() {
                out.set(i, j, c as f64 / self.trees.len() as f64);
            }
        }
        Ok(out)
    }

    /// Mean of the per-tree normalized importances, renormalized.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.feature_importance()) {
                *a += v;
            }
        }
        normalize(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::train_decision_tree;

    fn blobs() -> Dataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..3usize {
            for i in 0..15 {
                let off = c as f64 * 10.0;
                rows.push([off + (i % 5) as f64 * 0.3, off - (i / 5) as f64 * 0.2]);
                y.push(c);
            }
        }
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn single_unbootstrapped_tree_matches_cart() {
        let d = blobs();
        let hp = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::default()
        };
        let f = train_random_forest(&d, &hp, 3).unwrap();
        let t = train_decision_tree(&d, &TreeParams::default(), 3).unwrap();
        let probe = Matrix::from_rows(&[[5.0, 5.0], [-1.0, 0.0], [19.0, 30.0]]).unwrap();
        assert_eq!(f.predict(&probe).unwrap(), t.predict(&probe).unwrap());
    }

    #[test]
    fn blobs_fit_and_determinism() {
        let d = blobs();
        let hp = ForestParams {
            n_trees: 50,
            ..ForestParams::default()
        };
        let a = train_random_forest(&d, &hp, 11).unwrap();
        let b = train_random_forest(&d, &hp, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&d.x).unwrap(), d.y);
        let s: f64 = a.feature_importance().iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_trees_rejected() {
        let hp = ForestParams {
            n_trees: 0,
            ..ForestParams::default()
        };
        assert!(train_random_forest(&blobs(), &hp, 0).is_err());
    }
}
