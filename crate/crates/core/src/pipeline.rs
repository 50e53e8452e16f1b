//! End-to-end training run: impute, filter outliers, split, tune each model
//! family, select features, fit, evaluate, pick a family, persist.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::diagnostics::{self, partial_dependence, ridgeline_svg, Bandwidth, RidgelineSeries};
use crate::error::{Error, Result};
use crate::evaluate::{classification_report, confusion_matrix, render_report, ClassificationReport};
use crate::features::{FeatureTable, LifecycleStage};
use crate::ingest::rfc3339;
use crate::learners::{Family, Hyperparams, ModelDocument, Provenance};
use crate::outliers::{filter_class_outliers, ContaminationSpec, DEFAULT_TREES};
use crate::selection::{
    finalize, forward_sfs, grid_search, mix_seed, stratified_split, CvSpec, GridResult, ParamGrid, Scoring, SfsTrajectory,
};

fn default_window_end() -> DateTime<Utc> {
    rfc3339::parse("2023-12-31T23:59:59Z").expect("valid literal")
}

/// Run settings. The on-disk form is a flat TOML document with these keys;
/// `0` in `dt_max_leaf_nodes` stands for "unbounded".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(with = "rfc3339")]
    pub window_end: DateTime<Utc>,
    pub recency_days: i64,
    pub contamination_graduated: f64,
    pub contamination_incubating: f64,
    pub contamination_sandbox: f64,
    pub isolation_trees: usize,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub cv_repeats: usize,
    pub scoring: Scoring,
    pub smote_k: usize,
    pub families: Vec<Family>,
    pub feature_selection: bool,
    /// Families whose mean test score lies within this margin of the best are
    /// treated as tied; the cheapest of them wins.
    pub family_tie_epsilon: f64,
    /// `0` selects Silverman's rule.
    pub ridgeline_bandwidth: f64,
    pub dt_max_depth: Vec<usize>,
    pub dt_min_samples_split: Vec<usize>,
    pub dt_min_samples_leaf: Vec<usize>,
    pub dt_max_leaf_nodes: Vec<usize>,
    pub dt_ccp_alpha: Vec<f64>,
    pub rf_n_trees: Vec<usize>,
    pub rf_max_depth: Vec<usize>,
    pub rf_min_samples_leaf: Vec<usize>,
    pub gb_learning_rate: Vec<f64>,
    pub gb_max_depth: Vec<usize>,
    pub gb_n_stages: Vec<usize>,
    pub svm_c: Vec<f64>,
    pub svm_gamma: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let some = |v: Vec<Option<usize>>| v.into_iter().map(|x| x.unwrap_or(0)).collect();
        let (dt, rf, gb, svm) = (
            ParamGrid::standard(Family::DecisionTree),
            ParamGrid::standard(Family::RandomForest),
            ParamGrid::standard(Family::GradientBoosting),
            ParamGrid::standard(Family::Svm),
        );
        let ParamGrid::DecisionTree {
            max_depth,
            min_samples_split,
            min_samples_leaf,
            max_leaf_nodes,
            ccp_alpha,
        } = dt
        else {
            unreachable!()
        };
        let ParamGrid::RandomForest {
            n_trees,
            max_depth: rf_depth,
            min_samples_leaf: rf_leaf,
        } = rf
        else {
            unreachable!()
        };
        let ParamGrid::GradientBoosting {
            learning_rate,
            max_depth: gb_depth,
            n_stages,
        } = gb
        else {
            unreachable!()
        };
        let ParamGrid::Svm { c, gamma } = svm else { unreachable!() };
        Self {
            seed: 42,
            window_end: default_window_end(),
            recency_days: 365,
            contamination_graduated: 0.01,
            contamination_incubating: 0.05,
            contamination_sandbox: 0.10,
            isolation_trees: DEFAULT_TREES,
            test_fraction: 0.2,
            cv_folds: 10,
            cv_repeats: 10,
            scoring: Scoring::Accuracy,
            smote_k: crate::resample::DEFAULT_K,
            families: Family::ALL.to_vec(),
            feature_selection: true,
            family_tie_epsilon: 0.005,
            ridgeline_bandwidth: 0.0,
            dt_max_depth: some(max_depth),
            dt_min_samples_split: min_samples_split,
            dt_min_samples_leaf: min_samples_leaf,
            dt_max_leaf_nodes: some(max_leaf_nodes),
            dt_ccp_alpha: ccp_alpha,
            rf_n_trees: n_trees,
            rf_max_depth: some(rf_depth),
            rf_min_samples_leaf: rf_leaf,
            gb_learning_rate: learning_rate,
            gb_max_depth: gb_depth,
            gb_n_stages: n_stages,
            svm_c: c,
            svm_gamma: gamma,
            features: None,
            labels: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn contamination(&self) -> ContaminationSpec {
        ContaminationSpec {
            fractions: BTreeMap::from([
                (LifecycleStage::Graduated, self.contamination_graduated),
                (LifecycleStage::Incubating, self.contamination_incubating),
                (LifecycleStage::Sandbox, self.contamination_sandbox),
            ]),
        }
    }

    pub fn cv(&self) -> CvSpec {
        CvSpec {
            k: self.cv_folds,
            repeats: self.cv_repeats,
            seed: mix_seed(self.seed, 3, 0),
            scoring: self.scoring,
            smote_k: self.smote_k,
            resample: true,
        }
    }

    pub fn grid(&self, family: Family) -> ParamGrid {
        let opt = |v: &[usize]| v.iter().map(|&x| (x > 0).then_some(x)).collect::<Vec<_>>();
        match family {
            Family::DecisionTree => ParamGrid::DecisionTree {
                max_depth: opt(&self.dt_max_depth),
                min_samples_split: self.dt_min_samples_split.clone(),
                min_samples_leaf: self.dt_min_samples_leaf.clone(),
                max_leaf_nodes: opt(&self.dt_max_leaf_nodes),
                ccp_alpha: self.dt_ccp_alpha.clone(),
            },
            Family::RandomForest => ParamGrid::RandomForest {
                n_trees: self.rf_n_trees.clone(),
                max_depth: opt(&self.rf_max_depth),
                min_samples_leaf: self.rf_min_samples_leaf.clone(),
            },
            Family::GradientBoosting => ParamGrid::GradientBoosting {
                learning_rate: self.gb_learning_rate.clone(),
                max_depth: self.gb_max_depth.clone(),
                n_stages: self.gb_n_stages.clone(),
            },
            Family::Svm => ParamGrid::Svm {
                c: self.svm_c.clone(),
                gamma: self.svm_gamma.clone(),
            },
        }
    }

    pub fn bandwidth(&self) -> Bandwidth {
        if self.ridgeline_bandwidth > 0.0 {
            Bandwidth::Fixed(self.ridgeline_bandwidth)
        } else {
            Bandwidth::Silverman
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.contamination().validate()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.cv_folds < 2 || self.cv_repeats == 0 {
            return bad("cv_folds must be >= 2 and cv_repeats >= 1".into());
        }
        if self.families.is_empty() {
            return bad("families must name at least one model family".into());
        }
        if self.smote_k == 0 || self.isolation_trees == 0 {
            return bad("smote_k and isolation_trees must be positive".into());
        }
        if self.recency_days < 0 {
            return bad("recency_days must be non-negative".into());
        }
        for f in &self.families {
            if self.grid(*f).combinations().is_empty() {
                return bad(format!("grid for {f} is empty"));
            }
        }
        Ok(())
    }
}

/// Replaces missing (NaN) cells with 0.
pub fn impute_zeros(table: &FeatureTable) -> FeatureTable {
    let mut out = table.clone();
    for i in 0..out.x.rows() {
        for v in out.x.row_mut(i) {
            if v.is_nan() {
                *v = 0.0;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub input_rows: usize,
    pub imputed_cells: usize,
    pub input_per_class: BTreeMap<String, usize>,
    pub removed_per_class: BTreeMap<String, usize>,
    pub filtered_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_per_class: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScores {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl TestScores {
    fn of(r: &ClassificationReport) -> Self {
        Self {
            accuracy: r.accuracy,
            macro_f1: r.macro_avg.f1,
            weighted_f1: r.weighted_avg.f1,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.accuracy + self.macro_f1 + self.weighted_f1) / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub grid_size: usize,
    pub cv_mean: f64,
    pub cv_std: f64,
    pub selected_features: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sfs_score: Option<f64>,
    pub test: TestScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub crate_version: String,
    pub config: RunConfig,
    pub counts: StageCounts,
    pub families: Vec<FamilySummary>,
    pub chosen_family: Family,
    pub selection_rule: String,
    pub hyperparams: Hyperparams,
    pub selected_features: Vec<String>,
    pub report: ClassificationReport,
    /// Selected features with their importances, descending; empty for SVMs.
    pub importance: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock milliseconds per stage; the only non-deterministic field.
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Manifest JSON with `timings_ms` emptied.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut m = self.clone();
        m.timings_ms.clear();
        Ok(serde_json::to_string_pretty(&m)?)
    }

    /// Text summary: per-family scores, the report table and importances.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "rows: {} input, {} after outlier filtering, {} train / {} test\n\n",
            self.counts.input_rows, self.counts.filtered_rows, self.counts.train_rows, self.counts.test_rows
        ));
        out.push_str(&format!(
            "{:<18}  {:>7}  {:>8}  {:>8}  {:>11}  {:>8}\n",
            "family", "cv_mean", "accuracy", "macro_f1", "weighted_f1", "features"
        ));
        for f in &self.families {
            out.push_str(&format!(
                "{:<18}  {:>7.4}  {:>8.4}  {:>8.4}  {:>11.4}  {:>8}\n",
                f.family.name(),
                f.cv_mean,
                f.test.accuracy,
                f.test.macro_f1,
                f.test.weighted_f1,
                f.selected_features.len()
            ));
        }
        out.push_str(&format!("\nchosen: {} ({})\n\n", self.chosen_family, self.hyperparams.describe()));
        out.push_str(&render_report(&self.report));
        if !self.importance.is_empty() {
            out.push_str("\nFeature            Importance\n");
            for (name, v) in &self.importance {
                out.push_str(&format!("{name:<28}  {v:.6}\n"));
            }
        }
        out
    }
}

struct FamilyRun {
    summary: FamilySummary,
    grid: GridResult,
    sfs: Option<SfsTrajectory>,
    document: ModelDocument,
    report: ClassificationReport,
}

fn per_class_names(counts: &BTreeMap<usize, usize>) -> BTreeMap<String, usize> {
    counts.iter().map(|(&c, &n)| (crate::features::class_name(c), n)).collect()
}

/// Report rows ordered graduated, incubating, sandbox.
const REPORT_ORDER: [usize; 3] = [2, 1, 0];

fn evaluate_model(doc: &ModelDocument, test: &Dataset) -> Result<ClassificationReport> {
    let pred = doc.payload.predict(&test.x)?;
    let mut labels: Vec<usize> = REPORT_ORDER.to_vec();
    labels.retain(|l| test.y.contains(l) || pred.contains(l) || doc.classes.contains(l));
    classification_report(&confusion_matrix(&test.y, &pred, &labels)?)
}

fn run_family(family: Family, cfg: &RunConfig, train: &Dataset, test: &Dataset, timings: &mut BTreeMap<String, u64>) -> Result<FamilyRun> {
    let cv = cfg.cv();
    let t = Instant::now();
    let grid = grid_search(&cfg.grid(family), train, &cv).map_err(|e| e.at_stage("grid_search"))?;
    timings.insert(format!("grid_search.{family}"), t.elapsed().as_millis() as u64);
    let best = grid.best_combo().clone();

    let t = Instant::now();
    let sfs = if cfg.feature_selection {
        Some(forward_sfs(&best.hyperparams, train, &cv).map_err(|e| e.at_stage("feature_selection"))?)
    } else {
        None
    };
    timings.insert(format!("feature_selection.{family}"), t.elapsed().as_millis() as u64);
    let features: Vec<usize> = sfs.as_ref().map_or_else(|| (0..train.n_features()).collect(), |s| s.chosen().to_vec());

    let t = Instant::now();
    let seed = mix_seed(cfg.seed, 4, family.cost_rank() as u64);
    let (model, resampled) =
        finalize(&best.hyperparams, &features, train, cfg.smote_k, seed).map_err(|e| e.at_stage("finalize"))?;
    let names: Vec<String> = features.iter().map(|&j| train.column_names[j].clone()).collect();
    let document = ModelDocument::new(
        model,
        best.hyperparams.clone(),
        names.clone(),
        Provenance {
            seed,
            smote_k: cfg.smote_k,
            training_rows: train.len(),
            resampled_rows: resampled.len(),
            cv_mean_score: Some(best.cv.mean),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    );
    timings.insert(format!("finalize.{family}"), t.elapsed().as_millis() as u64);

    let report = evaluate_model(&document, &test.select_features(&features)).map_err(|e| e.at_stage("evaluate"))?;
    Ok(FamilyRun {
        summary: FamilySummary {
            family,
            hyperparams: best.hyperparams.clone(),
            grid_size: grid.combinations.len(),
            cv_mean: best.cv.mean,
            cv_std: best.cv.std,
            selected_features: names,
            sfs_score: sfs.as_ref().map(SfsTrajectory::chosen_score),
            test: TestScores::of(&report),
        },
        grid,
        sfs,
        document,
        report,
    })
}

/// Best mean of (accuracy, macro-F1, weighted-F1); families within `eps` of it
/// are tied and the cheapest wins.
pub fn choose_family(summaries: &[FamilySummary], eps: f64) -> usize {
    let top = summaries.iter().map(|s| s.test.mean()).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        if s.test.mean() < top - eps {
            continue;
        }
        if best.is_none_or(|b| s.family.cost_rank() < summaries[b].family.cost_rank()) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

/// Files produced by a run, in memory until the whole run has succeeded.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, body: impl Into<Vec<u8>>) {
        self.files.push((name.into(), body.into()));
    }

    /// Writes everything under `dir`; on failure removes what was written.
    fn commit(&self, dir: &Path) -> Result<()> {
        let created_dir = !dir.exists();
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for (name, body) in &self.files {
                let path = dir.join(name);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            Ok(())
        })();
        if result.is_err() {
            if created_dir {
                let _ = fs::remove_dir_all(dir);
            } else {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
            }
        }
        result
    }
}

fn table_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    FeatureTable::from_dataset(ds).write_csv(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cv_scores_csv(grid: &GridResult, k: usize) -> String {
    let mut body = String::from("combination_id,repeat,fold,score\n");
    for c in &grid.combinations {
        for (i, s) in c.cv.scores.iter().enumerate() {
            body.push_str(&format!("{},{},{},{}\n", c.id, i / k, i % k, s));
        }
    }
    body
}

/// Runs the full training flow on a labeled feature table and writes every
/// artifact under `out_dir`. Nothing is written unless all stages succeed.
pub fn run_training(cfg: &RunConfig, table: &FeatureTable, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut timings = BTreeMap::new();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let imputed_cells = table.x.as_slice().iter().filter(|v| v.is_nan()).count();
    let data = impute_zeros(table).to_dataset().map_err(|e| e.at_stage("impute"))?;
    timings.insert("impute".into(), t.elapsed().as_millis() as u64);

    let t = Instant::now();
    let filtered = filter_class_outliers(&data, &cfg.contamination(), cfg.isolation_trees, mix_seed(cfg.seed, 1, 0))
        .map_err(|e| e.at_stage("outlier_filter"))?;
    timings.insert("outlier_filter".into(), t.elapsed().as_millis() as u64);
    let before = data.class_counts();
    let after = filtered.class_counts();
    let removed: BTreeMap<usize, usize> = before
        .iter()
        .map(|(&c, &n)| (c, n - after.get(&c).copied().unwrap_or(0)))
        .collect();

    for (&c, &n) in &before {
        let left = after.get(&c).copied().unwrap_or(0);
        if left < cfg.cv_folds {
            return Err(Error::Precondition(format!(
                "class {} has {left} rows after outlier filtering (of {n}); {}-fold cross-validation needs at least {}",
                crate::features::class_name(c),
                cfg.cv_folds,
                cfg.cv_folds
            ))
            .at_stage("precondition"));
        }
    }

    let (train, test) =
        stratified_split(&filtered, cfg.test_fraction, mix_seed(cfg.seed, 2, 0)).map_err(|e| e.at_stage("split"))?;

    let mut runs = Vec::new();
    for &family in &cfg.families {
        log::info!("training {family}");
        let run = run_family(family, cfg, &train, &test, &mut timings)?;
        warnings.extend(run.grid.warnings.iter().map(|w| format!("{family}: {w}")));
        runs.push(run);
    }
    let summaries: Vec<FamilySummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let chosen = choose_family(&summaries, cfg.family_tie_epsilon);
    let chosen_run = &runs[chosen];
    let doc = &chosen_run.document;

    let importance: Vec<(String, f64)> = match doc.payload.feature_importance() {
        Some(v) => {
            let mut pairs: Vec<(String, f64)> = doc.selected_features.iter().cloned().zip(v).collect();
            pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            pairs
        }
        None => Vec::new(),
    };

    let t = Instant::now();
    let selected_idx: Vec<usize> = doc
        .selected_features
        .iter()
        .map(|n| filtered.column_index(n).expect("selected from these columns"))
        .collect();
    let ridges = diagnostics::ridgelines(&filtered.select_features(&selected_idx), cfg.bandwidth())
        .map_err(|e| e.at_stage("ridgeline"))?;
    timings.insert("ridgeline".into(), t.elapsed().as_millis() as u64);

    let mut out = Outputs { files: Vec::new() };
    out.add("filtered.csv", table_csv(&filtered)?);
    out.add("train.csv", table_csv(&train)?);
    out.add("test.csv", table_csv(&test)?);
    for r in &runs {
        let f = r.summary.family;
        out.add(format!("cv_scores_{f}.csv"), cv_scores_csv(&r.grid, cfg.cv_folds));
        if let Some(s) = &r.sfs {
            out.add(format!("sfs_{f}.json"), json_bytes(s)?);
        }
        out.add(format!("models/{f}.json"), format!("{}\n", r.document.to_json()?));
        out.add(format!("reports/{f}.json"), json_bytes(&r.report)?);
    }
    out.add("model.json", format!("{}\n", doc.to_json()?));
    out.add("report.json", json_bytes(&chosen_run.report)?);
    out.add("report.txt", render_report(&chosen_run.report));
    let mut imp_csv = String::from("feature,importance\n");
    for (n, v) in &importance {
        imp_csv.push_str(&format!("{n},{v}\n"));
    }
    out.add("importance.csv", imp_csv);
    out.add("ridgeline.csv", diagnostics::ridgeline::ridgeline_csv(&ridges));
    for s in &ridges {
        out.add(format!("ridgeline/{}.svg", s.feature), ridgeline_svg(s));
    }

    let mut artifacts: Vec<String> = out.files.iter().map(|(n, _)| n.clone()).collect();
    artifacts.push("manifest.json".into());
    let manifest = RunManifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        counts: StageCounts {
            input_rows: data.len(),
            imputed_cells,
            input_per_class: per_class_names(&before),
            removed_per_class: per_class_names(&removed),
            filtered_rows: filtered.len(),
            train_rows: train.len(),
            test_rows: test.len(),
            test_per_class: per_class_names(&test.class_counts()),
        },
        families: summaries,
        chosen_family: chosen_run.summary.family,
        selection_rule: format!(
            "highest mean of test accuracy, macro-F1 and weighted-F1; families within {} of the best count as tied and the cheapest (decision_tree < random_forest < gradient_boosting < svm) wins",
            cfg.family_tie_epsilon
        ),
        hyperparams: doc.hyperparams.clone(),
        selected_features: doc.selected_features.clone(),
        report: chosen_run.report.clone(),
        importance,
        warnings,
        artifacts,
        timings_ms: timings,
    };
    out.add("manifest.json", json_bytes(&manifest)?);
    out.commit(out_dir).map_err(|e| e.at_stage("persist"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub repo_id: String,
    pub stage: LifecycleStage,
    /// Per-class probabilities keyed by stage name; absent for SVMs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub predictions: Vec<Prediction>,
    /// Table columns the model does not use.
    pub ignored_columns: Vec<String>,
}

impl Classification {
    /// `repo_id,predicted[,p_<class>...]` rows in input order.
    pub fn to_csv(&self, classes: &[usize]) -> String {
        let names: Vec<String> = classes.iter().map(|&c| crate::features::class_name(c)).collect();
        let with_p = self.predictions.iter().any(|p| p.probabilities.is_some());
        let mut out = String::from("repo_id,predicted");
        if with_p {
            for n in &names {
                out.push_str(&format!(",p_{n}"));
            }
        }
        out.push('\n');
        for p in &self.predictions {
            out.push_str(&format!("{},{}", p.repo_id, p.stage));
            if let Some(probs) = &p.probabilities {
                for n in &names {
                    out.push_str(&format!(",{}", probs.get(n).copied().unwrap_or(0.0)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Predicts a stage for every row of `table` with a persisted model. Missing
/// cells are imputed with 0 as in training.
pub fn classify_table(doc: &ModelDocument, table: &FeatureTable) -> Result<Classification> {
    let idx = doc
        .selected_features
        .iter()
        .map(|f| table.column_index(f).ok_or_else(|| Error::MissingFeatureColumn(f.clone())))
        .collect::<Result<Vec<_>>>()?;
    let ignored_columns: Vec<String> = table
        .columns
        .iter()
        .filter(|c| !doc.selected_features.contains(c))
        .cloned()
        .collect();
    let x = impute_zeros(table).x.select_columns(&idx);
    let pred = doc.payload.predict(&x)?;
    let proba = doc.payload.predict_proba(&x)?;
    let classes = doc.payload.classes();
    let predictions = pred
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let stage = LifecycleStage::from_code(c).ok_or(Error::UnknownLabel(c))?;
            let probabilities = proba.as_ref().map(|p| {
                classes
                    .iter()
                    .enumerate()
                    .map(|(k, &cl)| (crate::features::class_name(cl), p.get(i, k)))
                    .collect()
            });
            Ok(Prediction {
                repo_id: table.repo_ids[i].clone(),
                stage,
                probabilities,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classification {
        predictions,
        ignored_columns,
    })
}

pub fn classify(model_path: impl AsRef<Path>, table: &FeatureTable) -> Result<Classification> {
    let doc = ModelDocument::load(model_path)?;
    classify_table(&doc, table)
}

/// Exploratory statistics over a labeled table: summary JSON, ridgeline CSV
/// and SVGs, and partial dependence when a model is supplied.
pub fn run_diagnostics(table: &FeatureTable, model: Option<&ModelDocument>, bandwidth: Bandwidth, out_dir: &Path) -> Result<diagnostics::DiagnosticsSummary> {
    let ds = impute_zeros(table).to_dataset().map_err(|e| e.at_stage("impute"))?;
    let summary = diagnostics::summarize(&ds).map_err(|e| e.at_stage("diagnostics"))?;
    let ridges: Vec<RidgelineSeries> = diagnostics::ridgelines(&ds, bandwidth).map_err(|e| e.at_stage("ridgeline"))?;
    let mut out = Outputs { files: Vec::new() };
    out.add("diagnostics.json", json_bytes(&summary)?);
    out.add("ridgeline.csv", diagnostics::ridgeline::ridgeline_csv(&ridges));
    for s in &ridges {
        out.add(format!("ridgeline/{}.svg", s.feature), ridgeline_svg(s));
    }
    if let Some(doc) = model {
        if doc.payload.predict_proba(&crate::dataset::Matrix::zeros(0, doc.payload.n_features()))?.is_some() {
            let idx = doc
                .selected_features
                .iter()
                .map(|f| ds.column_index(f).ok_or_else(|| Error::MissingFeatureColumn(f.clone())))
                .collect::<Result<Vec<_>>>()?;
            let x = ds.x.select_columns(&idx);
            let curves = (0..idx.len())
                .map(|j| partial_dependence(&doc.payload, &x, j, 20))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage("partial_dependence"))?;
            let named: Vec<(String, diagnostics::PartialDependence)> =
                doc.selected_features.iter().cloned().zip(curves).collect();
            out.add("partial_dependence.json", json_bytes(&named)?);
        }
    }
    out.commit(out_dir).map_err(|e| e.at_stage("persist"))?;
    Ok(summary)
}
