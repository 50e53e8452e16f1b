//! Classifier families behind one train/predict contract, plus model persistence.

pub mod boosting;
pub mod forest;
pub mod standardize;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use boosting::{train_gradient_boosting, BoostParams, GradientBoostingModel};
pub use forest::{train_random_forest, ForestParams, MaxFeatures, RandomForestModel};
pub use standardize::{fit_standardizer, standardize, Standardizer};
pub use svm::{train_svm_rbf, SvmParams, SvmRbfModel};
pub use tree::{prune_cost_complexity, train_decision_tree, DecisionTreeModel, TreeParams};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    RandomForest,
    GradientBoosting,
    Svm,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::DecisionTree,
        Family::RandomForest,
        Family::GradientBoosting,
        Family::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GradientBoosting => "gradient_boosting",
            Family::Svm => "svm",
        }
    }

    /// Rough training-cost rank, cheapest first.
    pub fn cost_rank(self) -> usize {
        match self {
            Family::DecisionTree => 0,
            Family::RandomForest => 1,
            Family::GradientBoosting => 2,
            Family::Svm => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "decision_tree" | "dt" | "tree" => Ok(Family::DecisionTree),
            "random_forest" | "rf" | "forest" => Ok(Family::RandomForest),
            "gradient_boosting" | "gb" | "boosting" => Ok(Family::GradientBoosting),
            "svm" | "svm_rbf" => Ok(Family::Svm),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostParams),
    Svm(SvmParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::RandomForest(_) => Family::RandomForest,
            Hyperparams::GradientBoosting(_) => Family::GradientBoosting,
            Hyperparams::Svm(_) => Family::Svm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Hyperparams::DecisionTree(p) => p.validate(),
            Hyperparams::RandomForest(p) => p.validate(),
            Hyperparams::GradientBoosting(p) => p.validate(),
            Hyperparams::Svm(p) => p.validate(),
        }
    }

    /// Compact `key=value` rendering for reports.
    pub fn describe(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |v| v.to_string());
        match self {
            Hyperparams::DecisionTree(p) => format!(
                "max_depth={} min_samples_split={} min_samples_leaf={} max_leaf_nodes={} ccp_alpha={}",
                opt(p.max_depth),
                p.min_samples_split,
                p.min_samples_leaf,
                opt(p.max_leaf_nodes),
                p.ccp_alpha
            ),
            Hyperparams::RandomForest(p) => format!(
                "n_trees={} max_depth={} min_samples_leaf={}",
                p.n_trees,
                opt(p.max_depth),
                p.min_samples_leaf
            ),
            Hyperparams::GradientBoosting(p) => format!(
                "n_stages={} learning_rate={} max_depth={}",
                p.n_stages, p.learning_rate, p.max_depth
            ),
            Hyperparams::Svm(p) => format!("C={} gamma={}", p.c, p.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum LearnerModel {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
    GradientBoosting(GradientBoostingModel),
    Svm(SvmRbfModel),
}

pub fn train(ds: &Dataset, hp: &Hyperparams, seed: u64) -> Result<LearnerModel> {
    Ok(match hp {
        Hyperparams::DecisionTree(p) => LearnerModel::DecisionTree(train_decision_tree(ds, p, seed)?),
        Hyperparams::RandomForest(p) => LearnerModel::RandomForest(train_random_forest(ds, p, seed)?),
        Hyperparams::GradientBoosting(p) => {
            LearnerModel::GradientBoosting(train_gradient_boosting(ds, p, seed)?)
        }
        Hyperparams::Svm(p) => LearnerModel::Svm(train_svm_rbf(ds, p, seed)?),
    })
}

impl LearnerModel {
    pub fn family(&self) -> Family {
        match self {
            LearnerModel::DecisionTree(_) => Family::DecisionTree,
            LearnerModel::RandomForest(_) => Family::RandomForest,
            LearnerModel::GradientBoosting(_) => Family::GradientBoosting,
            LearnerModel::Svm(_) => Family::Svm,
        }
    }

    pub fn classes(&self) -> &[usize] {
        match self {
            LearnerModel::DecisionTree(m) => &m.classes,
            LearnerModel::RandomForest(m) => &m.classes,
            LearnerModel::GradientBoosting(m) => &m.classes,
            LearnerModel::Svm(m) => &m.classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            LearnerModel::DecisionTree(m) => m.n_features,
            LearnerModel::RandomForest(m) => m.n_features,
            LearnerModel::GradientBoosting(m) => m.n_features,
            LearnerModel::Svm(m) => m.n_features,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            LearnerModel::DecisionTree(m) => m.predict(x),
            LearnerModel::RandomForest(m) => m.predict(x),
            LearnerModel::GradientBoosting(m) => m.predict(x),
            LearnerModel::Svm(m) => m.predict(x),
        }
    }

    /// Class probabilities with columns in `classes()` order; `None` for SVMs.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Option<Matrix>> {
        match self {
            LearnerModel::DecisionTree(m) => m.predict_proba(x).map(Some),
            LearnerModel::RandomForest(m) => m.predict_proba(x).map(Some),
            LearnerModel::GradientBoosting(m) => m.predict_proba(x).map(Some),
            LearnerModel::Svm(m) => {
                if x.cols() != m.n_features {
                    return Err(Error::DimensionMismatch {
                        expected: m.n_features,
                        got: x.cols(),
                    });
                }
                Ok(None)
            }
        }
    }

    /// Impurity-based importances summing to 1 (all zero for a single leaf);
    /// `None` for SVMs.
    pub fn feature_importance(&self) -> Option<Vec<f64>> {
        match self {
            LearnerModel::DecisionTree(m) => Some(m.feature_importance()),
            LearnerModel::RandomForest(m) => Some(m.feature_importance()),
            LearnerModel::GradientBoosting(m) => Some(m.feature_importance()),
            LearnerModel::Svm(_) => None,
        }
    }
}

pub const FORMAT_VERSION: u32 = 1;

/// Inputs that produced a persisted model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    #[serde(default)]
    pub smote_k: usize,
    #[serde(default)]
    pub training_rows: usize,
    #[serde(default)]
    pub resampled_rows: usize,
    #[serde(default)]
    pub cv_mean_score: Option<f64>,
    #[serde(default)]
    pub crate_version: String,
}

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub classes: Vec<usize>,
    pub selected_features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
    pub payload: LearnerModel,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ModelDocument {
    pub fn new(
        model: LearnerModel,
        hyperparams: Hyperparams,
        selected_features: Vec<String>,
        provenance: Provenance,
    ) -> Self {
        let standardizer = match &model {
            LearnerModel::Svm(m) => Some(m.standardizer.clone()),
            _ => None,
        };
        Self {
            format_version: FORMAT_VERSION,
            family: model.family(),
            hyperparams,
            classes: model.classes().to_vec(),
            selected_features,
            standardizer,
            payload: model,
            provenance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Config("model document lacks format_version".into()))?;
        if found > u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedFormatVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        if doc.payload.n_features() != doc.selected_features.len() {
            return Err(Error::DimensionMismatch {
                expected: doc.payload.n_features(),
                got: doc.selected_features.len(),
            });
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
