//! Stratified splitting, repeated stratified k-fold cross-validation, grid
//! search and forward sequential feature selection.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluate::macro_f1;
use crate::features::class_name;
use crate::learners::{
    self, BoostParams, Family, ForestParams, Hyperparams, LearnerModel, MaxFeatures, SvmParams, TreeParams,
};
use crate::resample::smote_tomek;

/// SplitMix64 finalizer, used to derive independent child seeds.
pub(crate) fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn members_by_class(y: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        m.entry(c).or_default().push(i);
    }
    m
}

/// Per-class test counts by the largest-remainder method: the total is
/// `round(f * n)` and class `c` is owed `n_c * total / n`. Remainder ties go to
/// the larger class, then the lower class code.
pub fn stratified_test_counts(class_sizes: &BTreeMap<usize, usize>, test_fraction: f64) -> BTreeMap<usize, usize> {
    let n: usize = class_sizes.values().sum();
    let total = (test_fraction * n as f64).round() as usize;
    let mut out = BTreeMap::new();
    let mut rema = Vec::new();
    let mut assigned = 0;
    for (&c, &nc) in class_sizes {
        let quota = nc as f64 * total as f64 / n as f64;
        let base = quota.floor() as usize;
        out.insert(c, base);
        assigned += base;
        rema.push((quota - base as f64, nc, c));
    }
    rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    for &(_, _, c) in rema.iter().take(total.saturating_sub(assigned)) {
        *out.get_mut(&c).expect("inserted above") += 1;
    }
    out
}

/// Seeded stratified holdout split. Both halves keep the input row order.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let members = members_by_class(&ds.y);
    for (&c, m) in &members {
        if m.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class_name(c),
                size: m.len(),
                needed: 2,
            });
        }
    }
    let sizes = members.iter().map(|(&c, m)| (c, m.len())).collect();
    let counts = stratified_test_counts(&sizes, test_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; ds.len()];
    for (c, mut m) in members {
        m.shuffle(&mut rng);
        for &i in &m[..counts[&c]] {
            is_test[i] = true;
        }
    }
    let test: Vec<usize> = (0..ds.len()).filter(|&i| is_test[i]).collect();
    let train: Vec<usize> = (0..ds.len()).filter(|&i| !is_test[i]).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index per row.
    pub fold_of: Vec<usize>,
    /// Set when some class has fewer rows than folds.
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Shuffles each class and deals its rows round-robin over the folds; the
/// dealing position carries over from one class to the next so fold sizes stay
/// within one row of each other.
pub fn stratified_kfold(y: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!("k must be at least 2, got {k}")));
    }
    if k > y.len() {
        return Err(Error::InvalidFolds(format!("k = {k} exceeds the {} available rows", y.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; y.len()];
    let mut warnings = Vec::new();
    let mut next = 0;
    for (c, mut m) in members_by_class(y) {
        if m.len() < k {
            warnings.push(format!(
                "class {} has {} rows, fewer than k = {k}; some folds lack it",
                class_name(c),
                m.len()
            ));
        }
        m.shuffle(&mut rng);
        for i in m {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    #[default]
    Accuracy,
    MacroF1,
}

impl Scoring {
    pub fn score(self, y_true: &[usize], y_pred: &[usize]) -> f64 {
        match self {
            Scoring::Accuracy => {
                let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
                hits as f64 / y_true.len().max(1) as f64
            }
            Scoring::MacroF1 => macro_f1(y_true, y_pred),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub scoring: Scoring,
    /// SMOTE neighbour count for in-fold resampling.
    pub smote_k: usize,
    /// Apply SMOTE+Tomek to each training fold.
    pub resample: bool,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            k: 10,
            repeats: 10,
            seed: 0,
            scoring: Scoring::Accuracy,
            smote_k: crate::resample::DEFAULT_K,
            resample: true,
        }
    }
}

impl CvSpec {
    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

/// One (repeat, fold) cell with its training half already resampled.
#[derive(Debug, Clone)]
pub struct CvCell {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
}

/// Builds every (repeat, fold) cell of `cv` on `ds`. Resampling uses only the
/// training rows of each cell.
pub fn prepare_cells(ds: &Dataset, cv: &CvSpec) -> Result<(Vec<CvCell>, Vec<String>)> {
    if cv.repeats == 0 {
        return Err(Error::InvalidFolds("repeats must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let mut plan = Vec::new();
    for r in 0..cv.repeats {
        let folds = stratified_kfold(&ds.y, cv.k, cv.repeat_seed(r))?;
        if r == 0 {
            warnings.extend(folds.warnings.iter().cloned());
        }
        for f in 0..cv.k {
            plan.push((r, f, folds.train_rows(f), folds.test_rows(f)));
        }
    }
    let cells = plan
        .into_par_iter()
        .map(|(repeat, fold, tr, te)| {
            let seed = mix_seed(cv.repeat_seed(repeat), fold as u64, 1);
            let raw = ds.subset(&tr);
            let train = if cv.resample {
                smote_tomek(&raw, cv.smote_k, seed).map_err(|e| Error::Fold {
                    repeat,
                    fold,
                    source: Box::new(e),
                })?
            } else {
                raw
            };
            Ok(CvCell {
                repeat,
                fold,
                seed,
                train,
                test: ds.subset(&te),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cells, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    /// Repeat-major, fold-minor.
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CvScores {
    fn from_scores(scores: Vec<f64>) -> Self {
        let n = scores.len().max(1) as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { scores, mean, std }
    }
}

/// Scores `hp` on prepared cells, optionally restricted to `columns`.
/// `hook` may rewrite each test fold before prediction.
pub fn score_cells<H>(hp: &Hyperparams, cells: &[CvCell], columns: Option<&[usize]>, scoring: Scoring, hook: &H) -> Result<CvScores>
where
    H: Fn(&mut Dataset) + Sync,
{
    let scores = cells
        .par_iter()
        .map(|cell| {
            let wrap = |e: Error| Error::Fold {
                repeat: cell.repeat,
                fold: cell.fold,
                source: Box::new(e),
            };
            let (train, mut test) = match columns {
                Some(c) => (cell.train.select_features(c), cell.test.select_features(c)),
                None => (cell.train.clone(), cell.test.clone()),
            };
            hook(&mut test);
            let model = learners::train(&train, hp, cell.seed).map_err(wrap)?;
            let pred = model.predict(&test.x).map_err(wrap)?;
            Ok(scoring.score(&test.y, &pred))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvScores::from_scores(scores))
}

fn no_hook(_: &mut Dataset) {}

/// Repeated stratified k-fold score of one configuration; `k * repeats` values.
pub fn cross_val_score(hp: &Hyperparams, ds: &Dataset, cv: &CvSpec) -> Result<CvScores> {
    let (cells, _) = prepare_cells(ds, cv)?;
    score_cells(hp, &cells, None, cv.scoring, &no_hook)
}

/// As [`cross_val_score`], with `hook` applied to every test fold.
pub fn cross_val_score_with_hook<H>(hp: &Hyperparams, ds: &Dataset, cv: &CvSpec, hook: H) -> Result<CvScores>
where
    H: Fn(&mut Dataset) + Sync,
{
    let (cells, _) = prepare_cells(ds, cv)?;
    score_cells(hp, &cells, None, cv.scoring, &hook)
}

/// Value lists per hyperparameter; combinations are their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParamGrid {
    DecisionTree {
        max_depth: Vec<Option<usize>>,
        min_samples_split: Vec<usize>,
        min_samples_leaf: Vec<usize>,
        max_leaf_nodes: Vec<Option<usize>>,
        ccp_alpha: Vec<f64>,
    },
    RandomForest {
        n_trees: Vec<usize>,
        max_depth: Vec<Option<usize>>,
        min_samples_leaf: Vec<usize>,
    },
    GradientBoosting {
        learning_rate: Vec<f64>,
        max_depth: Vec<usize>,
        n_stages: Vec<usize>,
    },
    Svm {
        c: Vec<f64>,
        gamma: Vec<f64>,
    },
}

fn dedup<T: PartialEq + Clone>(v: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for x in v {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

fn product2<A: Clone, B: Clone>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|x| b.iter().map(move |y| (x.clone(), y.clone()))).collect()
}

impl ParamGrid {
    /// Published search space for `family`.
    pub fn standard(family: Family) -> Self {
        match family {
            Family::DecisionTree => ParamGrid::DecisionTree {
                max_depth: vec![Some(3), Some(5), Some(7), Some(10), Some(15)],
                min_samples_split: vec![2, 5, 10],
                min_samples_leaf: vec![1, 2, 5, 10],
                max_leaf_nodes: vec![None, Some(10), Some(20), Some(50)],
                ccp_alpha: vec![0.0, 0.0001, 0.001, 0.01],
            },
            Family::RandomForest => ParamGrid::RandomForest {
                n_trees: vec![50, 100, 200],
                max_depth: vec![Some(5), Some(10), Some(15)],
                min_samples_leaf: vec![1, 2, 5],
            },
            Family::GradientBoosting => ParamGrid::GradientBoosting {
                learning_rate: vec![0.001, 0.01, 0.1],
                max_depth: vec![3, 5, 7],
                n_stages: vec![50, 100, 200],
            },
            Family::Svm => ParamGrid::Svm {
                c: vec![0.001, 0.001, 0.1, 1.0, 10.0, 100.0],
                gamma: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ParamGrid::DecisionTree { .. } => Family::DecisionTree,
            ParamGrid::RandomForest { .. } => Family::RandomForest,
            ParamGrid::GradientBoosting { .. } => Family::GradientBoosting,
            ParamGrid::Svm { .. } => Family::Svm,
        }
    }

    /// Cartesian product in declaration order (last axis varies fastest), with
    /// duplicate axis values collapsed.
    pub fn combinations(&self) -> Vec<Hyperparams> {
        match self {
            ParamGrid::DecisionTree {
                max_depth,
                min_samples_split,
                min_samples_leaf,
                max_leaf_nodes,
                ccp_alpha,
            } => {
                let mut out = Vec::new();
                for d in dedup(max_depth) {
                    for s in dedup(min_samples_split) {
                        for (l, (m, a)) in product2(&dedup(min_samples_leaf), &product2(&dedup(max_leaf_nodes), &dedup(ccp_alpha))) {
                            out.push(Hyperparams::DecisionTree(TreeParams {
                                max_depth: d,
                                min_samples_split: s,
                                min_samples_leaf: l,
                                max_leaf_nodes: m,
                                ccp_alpha: a,
                            }));
                        }
                    }
                }
                out
            }
            ParamGrid::RandomForest {
                n_trees,
                max_depth,
                min_samples_leaf,
            } => product2(&dedup(n_trees), &product2(&dedup(max_depth), &dedup(min_samples_leaf)))
                .into_iter()
                .map(|(t, (d, l))| {
                    Hyperparams::RandomForest(ForestParams {
                        n_trees: t,
                        max_depth: d,
                        min_samples_leaf: l,
                        min_samples_split: 2,
                        max_features: MaxFeatures::Sqrt,
                        bootstrap: true,
                    })
                })
                .collect(),
            ParamGrid::GradientBoosting {
                learning_rate,
                max_depth,
                n_stages,
            } => product2(&dedup(learning_rate), &product2(&dedup(max_depth), &dedup(n_stages)))
                .into_iter()
                .map(|(lr, (d, s))| {
                    Hyperparams::GradientBoosting(BoostParams {
                        n_stages: s,
                        learning_rate: lr,
                        max_depth: d,
                        ..BoostParams::default()
                    })
                })
                .collect(),
            ParamGrid::Svm { c, gamma } => product2(&dedup(c), &dedup(gamma))
                .into_iter()
                .map(|(c, g)| {
                    Hyperparams::Svm(SvmParams {
                        c,
                        gamma: g,
                        ..SvmParams::default()
                    })
                })
                .collect(),
        }
    }
}

/// Lexicographic complexity key; smaller means simpler.
pub fn complexity_key(hp: &Hyperparams) -> Vec<f64> {
    let opt = |v: Option<usize>| v.map_or(f64::INFINITY, |v| v as f64);
    match hp {
        Hyperparams::DecisionTree(p) => vec![
            opt(p.max_depth),
            opt(p.max_leaf_nodes),
            -(p.min_samples_leaf as f64),
            -(p.min_samples_split as f64),
            -p.ccp_alpha,
        ],
        Hyperparams::RandomForest(p) => vec![p.n_trees as f64, opt(p.max_depth), -(p.min_samples_leaf as f64)],
        Hyperparams::GradientBoosting(p) => vec![p.n_stages as f64, p.max_depth as f64, p.learning_rate],
        Hyperparams::Svm(p) => vec![p.c, p.gamma],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub id: usize,
    pub hyperparams: Hyperparams,
    pub cv: CvScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: Family,
    pub combinations: Vec<ComboResult>,
    /// Index into `combinations`.
    pub best: usize,
    pub selection_rule: String,
    pub warnings: Vec<String>,
}

impl GridResult {
    pub fn best_combo(&self) -> &ComboResult {
        &self.combinations[self.best]
    }

    /// `combination_id,repeat,fold,score` rows.
    pub fn write_scores_csv(&self, path: impl AsRef<Path>, cv: &CvSpec) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut body = String::from("combination_id,repeat,fold,score\n");
        for c in &self.combinations {
            for (i, s) in c.cv.scores.iter().enumerate() {
                body.push_str(&format!("{},{},{},{}\n", c.id, i / cv.k, i % cv.k, s));
            }
        }
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

const SCORE_EPS: f64 = 1e-12;

/// Index of the winner: highest mean, then lowest complexity key, then
/// earliest position.
pub fn pick_best(results: &[ComboResult]) -> usize {
    let top = results.iter().map(|r| r.cv.mean).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.cv.mean < top - SCORE_EPS {
            continue;
        }
        best = match best {
            Some(b) if complexity_key(&results[b].hyperparams) <= complexity_key(&r.hyperparams) => Some(b),
            _ => Some(i),
        };
    }
    best.unwrap_or(0)
}

/// Scores every combination of `grid` with repeated stratified CV.
pub fn grid_search(grid: &ParamGrid, ds: &Dataset, cv: &CvSpec) -> Result<GridResult> {
    grid_search_combinations(grid.family(), &grid.combinations(), ds, cv)
}

pub fn grid_search_combinations(family: Family, combos: &[Hyperparams], ds: &Dataset, cv: &CvSpec) -> Result<GridResult> {
    let combos = dedup(combos);
    if combos.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for hp in &combos {
        hp.validate()?;
    }
    let (cells, warnings) = prepare_cells(ds, cv)?;
    let combinations = combos
        .into_par_iter()
        .enumerate()
        .map(|(id, hp)| {
            let cv = score_cells(&hp, &cells, None, cv.scoring, &no_hook)?;
            Ok(ComboResult { id, hyperparams: hp, cv })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = pick_best(&combinations);
    Ok(GridResult {
        family,
        combinations,
        best,
        selection_rule: format!(
            "max mean {:?}; ties within {SCORE_EPS:e} broken by lower complexity, then grid order",
            cv.scoring
        ),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsStep {
    pub added: usize,
    pub added_name: String,
    /// Cumulative set in ascending column order.
    pub features: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsTrajectory {
    pub steps: Vec<SfsStep>,
    /// Index into `steps` of the chosen set.
    pub chosen_step: usize,
}

impl SfsTrajectory {
    pub fn chosen(&self) -> &[usize] {
        &self.steps[self.chosen_step].features
    }

    pub fn chosen_score(&self) -> f64 {
        self.steps[self.chosen_step].score
    }
}

/// Forward selection over the full trajectory. Each candidate subset is scored
/// on the same resampled cells, restricted to the subset's columns.
pub fn forward_sfs(hp: &Hyperparams, ds: &Dataset, cv: &CvSpec) -> Result<SfsTrajectory> {
    let p = ds.n_features();
    if p == 0 {
        return Err(Error::EmptyInput("feature selection needs at least one feature"));
    }
    let (cells, _) = prepare_cells(ds, cv)?;
    let mut current: Vec<usize> = Vec::new();
    let mut steps = Vec::with_capacity(p);
    while current.len() < p {
        let candidates: Vec<usize> = (0..p).filter(|f| !current.contains(f)).collect();
        let scored = candidates
            .par_iter()
            .map(|&f| {
                let mut set = current.clone();
                set.push(f);
                set.sort_unstable();
                let s = score_cells(hp, &cells, Some(&set), cv.scoring, &no_hook)?;
                Ok((f, set, s.mean))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (i, s) in scored.iter().enumerate() {
            if s.2 > scored[best].2 + SCORE_EPS {
                best = i;
            }
        }
        let (added, set, score) = scored[best].clone();
        current = set.clone();
        steps.push(SfsStep {
            added,
            added_name: ds.column_names[added].clone(),
            features: set,
            score,
        });
    }
    let top = steps.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let chosen_step = steps.iter().position(|s| s.score >= top - SCORE_EPS).unwrap_or(0);
    Ok(SfsTrajectory { steps, chosen_step })
}

/// Final fit: resample the full training set, restrict it to `features`, train.
/// Returns the model and the resampled, restricted training data.
pub fn finalize(hp: &Hyperparams, features: &[usize], train: &Dataset, smote_k: usize, seed: u64) -> Result<(LearnerModel, Dataset)> {
    let resampled = smote_tomek(train, smote_k, seed)?;
    let restricted = resampled.select_features(features);
    let model = learners::train(&restricted, hp, seed)?;
    Ok((model, restricted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_class_sizes_split_four_six_twentyone() {
        let sizes = BTreeMap::from([(0, 101), (1, 30), (2, 22)]);
        let t = stratified_test_counts(&sizes, 0.2);
        assert_eq!((t[&2], t[&1], t[&0]), (4, 6, 21));
    }

    #[test]
    fn single_class_split() {
        let ds = Dataset::from_rows(&(0..10).map(|i| [i as f64]).collect::<Vec<_>>(), vec![0; 10]).unwrap();
        let (tr, te) = stratified_split(&ds, 0.2, 4).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn balanced_folds_get_one_of_each() {
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let f = stratified_kfold(&y, 10, 9).unwrap();
        for fold in 0..10 {
            let mut seen: Vec<usize> = f.test_rows(fold).iter().map(|&i| y[i]).collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2]);
        }
        assert_eq!(f, stratified_kfold(&y, 10, 9).unwrap());
        assert!(matches!(stratified_kfold(&y, 1, 0), Err(Error::InvalidFolds(_))));
    }

    #[test]
    fn default_tree_grid_size() {
        assert_eq!(ParamGrid::standard(Family::DecisionTree).combinations().len(), 960);
        assert_eq!(ParamGrid::standard(Family::Svm).combinations().len(), 25);
    }

    #[test]
    fn simpler_combo_wins_ties() {
        let mk = |d| ComboResult {
            id: 0,
            hyperparams: Hyperparams::DecisionTree(TreeParams {
                max_depth: Some(d),
                ..TreeParams::default()
            }),
            cv: CvScores::from_scores(vec![0.5]),
        };
        assert_eq!(pick_best(&[mk(7), mk(3), mk(5)]), 1);
    }
}
