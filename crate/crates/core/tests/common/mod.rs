#![allow(dead_code)]

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use oss_lifecycle::ingest::{Activity, CommitRecord, IssueRecord, ProjectEventLog, PullRequestRecord};
use oss_lifecycle::features::{FeatureTable, LifecycleStage, METRIC_NAMES};
use oss_lifecycle::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Per-stage means (sandbox, incubating, graduated) of the informative metrics.
pub const CLUSTER_MEANS: [(&str, [f64; 3]); 4] = [
    ("new_contributor_count", [5.0, 25.0, 80.0]),
    ("stars_count", [200.0, 2000.0, 12000.0]),
    ("pr_average_commits", [1.5, 3.0, 5.0]),
    ("dependency_count", [8.0, 25.0, 60.0]),
];

/// Rows per stage: sandbox, incubating, graduated.
pub const CLUSTER_SIZES: [usize; 3] = [75, 45, 30];

/// Seeded three-cluster feature table over the canonical metric columns. The
/// informative metrics are normal around [`CLUSTER_MEANS`] with a 12%
/// coefficient of variation; every other metric is uniform noise shared by all
/// stages.
pub fn synthetic_table(seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    let mut x = Matrix::zeros(0, columns.len());
    let mut repo_ids = Vec::new();
    let mut labels = Vec::new();
    for (stage, &n) in LifecycleStage::ALL.iter().zip(&CLUSTER_SIZES) {
        for _ in 0..n {
            let row: Vec<f64> = METRIC_NAMES
                .iter()
                .map(|m| match CLUSTER_MEANS.iter().find(|(name, _)| name == m) {
                    Some((_, means)) => {
                        let mu = means[stage.code()];
                        let v: f64 = Normal::new(mu, 0.12 * mu).unwrap().sample(&mut rng);
                        if *m == "pr_average_commits" {
                            v.abs()
                        } else {
                            v.abs().round()
                        }
                    }
                    None => rng.random_range(0.0..50.0f64).round(),
                })
                .collect();
            x.push_row(&row).unwrap();
            repo_ids.push(format!("org/project-{:03}", repo_ids.len()));
            labels.push(Some(*stage));
        }
    }
    FeatureTable {
        columns,
        repo_ids,
        x,
        labels,
    }
}

/// Small grids and 5-fold x 2 cross-validation for end-to-end runs.
pub fn reduced_config(features: &Path, out_dir: &Path, seed: u64) -> String {
    format!(
        r#"seed = {seed}
features = "{}"
out_dir = "{}"
cv_folds = 5
cv_repeats = 2
dt_max_depth = [3, 5]
dt_min_samples_split = [2]
dt_min_samples_leaf = [1, 5]
dt_max_leaf_nodes = [0]
dt_ccp_alpha = [0.0, 0.01]
rf_n_trees = [15]
rf_max_depth = [5]
rf_min_samples_leaf = [1]
gb_learning_rate = [0.1]
gb_max_depth = [2]
gb_n_stages = [15]
svm_c = [1.0, 10.0]
svm_gamma = [0.1]
"#,
        features.display(),
        out_dir.display()
    )
}

pub fn write_table(table: &FeatureTable, path: &Path) {
    table.write_path(path).unwrap();
}


const AUTHORS: [&str; 7] = ["alice", "Alice", "bob", "carol", "dave", "erin", "renovate[bot]"];

/// Random log that satisfies every archive invariant. Events fall inside a
/// two-year window ending 2023-12-31.
pub fn random_log(seed: u64) -> ProjectEventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(2023, 12, 31, 0, 0, 0).unwrap();
    let span = (end - start).num_seconds();
    let at = |rng: &mut ChaCha8Rng, from: DateTime<Utc>| {
        let left = (end - from).num_seconds().max(1);
        from + Duration::seconds(rng.random_range(0..left))
    };
    let author = |rng: &mut ChaCha8Rng| AUTHORS[rng.random_range(0..AUTHORS.len())].to_string();
    let mut log = ProjectEventLog::empty(format!("org/repo-{seed}"), start, end);
    for i in 0..rng.random_range(0..25) {
        let t = at(&mut rng, start);
        log.commits.push(CommitRecord {
            sha: format!("sha{i}"),
            author_id: author(&mut rng),
            authored_at: t,
            files_changed: rng.random_range(0..10),
        });
    }
    for n in 1..=rng.random_range(0..8u64) {
        let created = at(&mut rng, start);
        let closed = rng.random_bool(0.6).then(|| at(&mut rng, created));
        let acts = |rng: &mut ChaCha8Rng, k: usize| -> Vec<Activity> {
            (0..rng.random_range(0..k)).map(|_| Activity::new(author(rng), at(rng, created))).collect()
        };
        let commit_shas = (0..rng.random_range(0..4)).map(|j| format!("pr{n}-{j}")).collect();
        log.pull_requests.push(PullRequestRecord {
            number: n,
            author_id: author(&mut rng),
            created_at: created,
            closed_at: closed,
            merged: closed.is_some() && rng.random_bool(0.5),
            files: (0..rng.random_range(0..5)).map(|j| format!("src/f{}.rs", j % 3)).collect(),
            commit_shas,
            comments: acts(&mut rng, 4),
            reviews: acts(&mut rng, 3),
            review_comments: acts(&mut rng, 3),
        });
    }
    for n in 1..=rng.random_range(0..8u64) {
        let created = at(&mut rng, start);
        let closed = rng.random_bool(0.5).then(|| at(&mut rng, created));
        let comments = (0..rng.random_range(0..4)).map(|_| Activity::new(author(&mut rng), at(&mut rng, created))).collect();
        log.issues.push(IssueRecord {
            number: 100 + n,
            author_id: author(&mut rng),
            created_at: created,
            closed_at: closed,
            comments,
        });
    }
    for _ in 0..rng.random_range(0..4) {
        log.releases.push(start + Duration::seconds(rng.random_range(0..span)));
    }
    log.releases.sort();
    log.stars_count = rng.random_range(0..5000);
    log.fork_count = rng.random_range(0..500);
    log.watchers_count = rng.random_range(0..300);
    log.dependencies = (0..rng.random_range(0..6)).map(|i| format!("dep{i}")).collect();
    log
}
