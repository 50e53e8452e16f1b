mod common;

use std::collections::HashMap;

use chrono::{Duration, TimeZone, Utc};
use oss_lifecycle::features::{
    avg_time_to_first_response, bus_factor, compute_features, features_to_table, new_contributor_count,
    FeatureOptions, FeatureTable, FeatureVector, LifecycleStage, METRIC_NAMES,
};
use oss_lifecycle::ingest::{load_archive, write_archive, Activity, IssueRecord, ProjectEventLog};
use oss_lifecycle::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ts(s: &str) -> chrono::DateTime<Utc> {
    oss_lifecycle::ingest::rfc3339::parse(s).unwrap()
}

fn issue(created: &str, author: &str, comments: &[(&str, &str)]) -> IssueRecord {
    IssueRecord {
        number: 1,
        author_id: author.into(),
        created_at: ts(created),
        closed_at: None,
        comments: comments.iter().map(|(a, t)| Activity::new(*a, ts(t))).collect(),
    }
}

fn values(fv: &FeatureVector) -> Vec<f64> {
    fv.values.iter().map(|(_, v)| *v).collect()
}

#[test]
fn empty_log_is_all_zero() {
    let log = ProjectEventLog::empty("o/r", ts("2023-01-01T00:00:00Z"), ts("2023-12-31T00:00:00Z"));
    let fv = compute_features(&log, &FeatureOptions::default()).unwrap();
    assert_eq!(fv.values.len(), 21);
    assert!(values(&fv).iter().all(|v| *v == 0.0));
    let names: Vec<&str> = fv.values.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, METRIC_NAMES);
}

#[test]
fn time_to_first_response() {
    assert_eq!(avg_time_to_first_response(&[]), 0.0);
    let one = issue("2023-01-01T00:00:00Z", "a", &[("b", "2023-01-01T12:00:00Z")]);
    assert_eq!(avg_time_to_first_response(&[one]), 12.0);
    let two = [
        issue("2023-01-01T00:00:00Z", "a", &[("b", "2023-01-01T02:00:00Z")]),
        issue("2023-02-01T00:00:00Z", "a", &[("a", "2023-02-01T01:00:00Z"), ("c", "2023-02-01T04:00:00Z")]),
    ];
    assert_eq!(avg_time_to_first_response(&two), 3.0);
    let self_only = issue("2023-01-01T00:00:00Z", "a", &[("a", "2023-01-01T01:00:00Z")]);
    assert_eq!(avg_time_to_first_response(std::slice::from_ref(&self_only)), 0.0);
    let mut both = two.to_vec();
    both.push(self_only);
    assert_eq!(avg_time_to_first_response(&both), 3.0);
}

#[test]
fn bus_factor_examples() {
    let m = HashMap::from([("a", 50u64), ("b", 30), ("c", 20)]);
    assert_eq!(bus_factor(&m, 0.5).unwrap(), 1);
    let m = HashMap::from([("a", 25u64), ("b", 25), ("c", 25), ("d", 25)]);
    assert_eq!(bus_factor(&m, 0.5).unwrap(), 2);
    assert_eq!(bus_factor(&HashMap::<&str, u64>::new(), 0.5).unwrap(), 0);
    assert!(matches!(bus_factor(&m, 0.0), Err(Error::InvalidThreshold(_))));
    assert!(matches!(bus_factor(&m, 1.5), Err(Error::InvalidThreshold(_))));
}

#[test]
fn new_contributors() {
    let mut log = ProjectEventLog::empty("o/r", ts("2020-01-01T00:00:00Z"), ts("2023-12-31T00:00:00Z"));
    log.issues.push(issue("2021-01-01T00:00:00Z", "old", &[("old", "2023-06-01T00:00:00Z")]));
    assert_eq!(new_contributor_count(&log, 365, true), 0);
    log.issues.push(issue("2023-12-21T00:00:00Z", "fresh", &[]));
    assert_eq!(new_contributor_count(&log, 365, true), 1);
    assert_eq!(new_contributor_count(&log, 5, true), 0);
}

#[test]
fn minirepo_pull_request_metrics() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minirepo");
    let fv = compute_features(&load_archive(dir).unwrap(), &FeatureOptions::default()).unwrap();
    assert_eq!(fv.get("pr_count"), Some(2.0));
    assert_eq!(fv.get("pr_total_commits"), Some(4.0));
    assert_eq!(fv.get("pr_average_commits"), Some(2.0));
    assert_eq!(fv.get("new_contributor_count"), Some(1.0));
}

#[test]
fn table_shapes_and_csv_round_trip() {
    let rows: Vec<FeatureVector> = (0..3)
        .map(|s| {
            let mut fv = compute_features(&common::random_log(s), &FeatureOptions::default()).unwrap();
            fv.label = LifecycleStage::from_code(s as usize);
            fv
        })
        .collect();
    let t = features_to_table(&rows).unwrap();
    assert_eq!((t.x.rows(), t.x.cols()), (3, 21));
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);

    let empty = features_to_table(&[]).unwrap();
    assert_eq!((empty.x.rows(), empty.x.cols()), (0, 21));
    let mut buf = Vec::new();
    empty.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);

    let mut bad = rows.clone();
    bad[1].values.pop();
    assert!(matches!(features_to_table(&bad), Err(Error::ColumnMismatch(_))));
}

#[test]
fn labels_join_and_reject_unknown() {
    let rows: Vec<FeatureVector> = (0..2)
        .map(|s| compute_features(&common::random_log(s), &FeatureOptions::default()).unwrap())
        .collect();
    let mut t = features_to_table(&rows).unwrap();
    t.attach_labels("repo_id,label\norg/repo-1,grads\n".as_bytes()).unwrap();
    assert_eq!(t.labels, vec![None, Some(LifecycleStage::Graduated)]);
    assert!(matches!(t.to_dataset(), Err(Error::UnlabeledRow(_))));
    assert!(matches!(
        t.attach_labels("repo_id,label\norg/repo-0,archived\n".as_bytes()),
        Err(Error::UnknownStage(_))
    ));
}

fn brute_bus_factor(counts: &[u64], threshold: f64) -> u64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0;
    }
    let n = counts.len();
    (0u32..1 << n)
        .filter(|mask| {
            let s: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| counts[i]).sum();
            s as f64 >= threshold * total as f64
        })
        .map(|mask| u64::from(mask.count_ones()))
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bus_factor_matches_subset_oracle(counts in prop::collection::vec(0u64..40, 0..=12), t in 0.05f64..=1.0) {
        let m: HashMap<usize, u64> = counts.iter().copied().enumerate().collect();
        prop_assert_eq!(bus_factor(&m, t).unwrap(), brute_bus_factor(&counts, t));
    }

    #[test]
    fn bus_factor_monotone_in_threshold(counts in prop::collection::vec(0u64..40, 1..=12), a in 0.05f64..=1.0, b in 0.05f64..=1.0) {
        let m: HashMap<usize, u64> = counts.iter().copied().enumerate().collect();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bus_factor(&m, lo).unwrap() <= bus_factor(&m, hi).unwrap());
    }

    #[test]
    fn metrics_ignore_event_order(seed in any::<u64>()) {
        let log = common::random_log(seed);
        let base = compute_features(&log, &FeatureOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut shuffled = log.clone();
        shuffled.commits.shuffle(&mut rng);
        shuffled.pull_requests.shuffle(&mut rng);
        shuffled.issues.shuffle(&mut rng);
        shuffled.releases.shuffle(&mut rng);
        shuffled.dependencies.shuffle(&mut rng);
        for i in &mut shuffled.issues {
            i.comments.shuffle(&mut rng);
        }
        for p in &mut shuffled.pull_requests {
            p.comments.shuffle(&mut rng);
            p.files.shuffle(&mut rng);
        }
        let other = compute_features(&shuffled, &FeatureOptions::default()).unwrap();
        for (a, b) in values(&base).iter().zip(values(&other)) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn metrics_ignore_time_shift(seed in any::<u64>(), days in -3000i64..3000) {
        let log = common::random_log(seed);
        let d = Duration::days(days);
        let mut moved = log.clone();
        moved.window_start += d;
        moved.window_end += d;
        for c in &mut moved.commits { c.authored_at += d; }
        for p in &mut moved.pull_requests {
            p.created_at += d;
            p.closed_at = p.closed_at.map(|t| t + d);
            for a in p.comments.iter_mut().chain(&mut p.reviews).chain(&mut p.review_comments) { a.timestamp += d; }
        }
        for i in &mut moved.issues {
            i.created_at += d;
            i.closed_at = i.closed_at.map(|t| t + d);
            for a in &mut i.comments { a.timestamp += d; }
        }
        for r in &mut moved.releases { *r += d; }
        let a = values(&compute_features(&log, &FeatureOptions::default()).unwrap());
        let b = values(&compute_features(&moved, &FeatureOptions::default()).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn metric_identities(seed in any::<u64>()) {
        let log = common::random_log(seed);
        let fv = compute_features(&log, &FeatureOptions::default()).unwrap();
        let get = |n: &str| fv.get(n).unwrap();
        prop_assert!(values(&fv).iter().all(|v| v.is_finite() && *v >= 0.0));
        if get("pr_count") >= 1.0 {
            prop_assert!(get("pr_total_commits") >= get("pr_average_commits"));
        }
        let expect = get("avg_comment_count_issue") * log.issues.len() as f64;
        prop_assert!((get("total_comment_count_issue") - expect).abs() <= 1e-9);
    }

    #[test]
    fn archive_round_trip(seed in any::<u64>()) {
        let log = common::random_log(seed);
        prop_assert!(oss_lifecycle::ingest::validate_log(&log).is_empty());
        let dir = tempfile::tempdir().unwrap();
        write_archive(&log, dir.path()).unwrap();
        prop_assert_eq!(load_archive(dir.path()).unwrap(), log);
    }
}

#[test]
fn window_end_default_is_latest_event() {
    let mut log = ProjectEventLog::empty("o/r", ts("2023-01-01T00:00:00Z"), ts("2023-01-01T00:00:00Z"));
    log.issues.push(issue("2023-03-01T00:00:00Z", "a", &[("b", "2023-03-02T00:00:00Z")]));
    let dir = tempfile::tempdir().unwrap();
    write_archive(&log, dir.path()).unwrap();
    std::fs::write(dir.path().join("meta.json"), "{\"repo_id\": \"o/r\"}\n").unwrap();
    let loaded = load_archive(dir.path()).unwrap();
    assert_eq!(loaded.window_end, Utc.with_ymd_and_hms(2023, 3, 2, 0, 0, 0).unwrap());
    assert_eq!(loaded.window_start, Utc.with_ymd_and_hms(2023, 3, 1, 0, 0, 0).unwrap());
}
