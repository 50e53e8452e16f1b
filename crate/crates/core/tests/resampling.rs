use oss_lifecycle::outliers::{
    anomaly_score, filter_class_outliers, fit_isolation_forest, removal_count, score_rows, ContaminationSpec,
};
use oss_lifecycle::resample::{remove_tomek_links, smote, smote_tomek, tomek_links, TomekPolicy};
use oss_lifecycle::{Dataset, Error, Matrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(seed: u64, n: usize, dims: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn imbalanced(seed: u64, sizes: &[usize]) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            rows.push([c as f64 * 2.0 + rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)]);
            y.push(c);
        }
    }
    Dataset::from_rows(&rows, y).unwrap()
}

fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    // Solve p = a + u (b - a) on the widest axis, then check every axis.
    let axis = (0..a.len()).max_by(|&i, &j| (b[i] - a[i]).abs().total_cmp(&(b[j] - a[j]).abs())).unwrap();
    let span = b[axis] - a[axis];
    let u = if span == 0.0 { 0.0 } else { (p[axis] - a[axis]) / span };
    (-1e-9..=1.0 + 1e-9).contains(&u)
        && (0..a.len()).all(|i| (a[i] + u * (b[i] - a[i]) - p[i]).abs() <= 1e-9 * (1.0 + p[i].abs()))
}

#[test]
fn scores_stay_in_open_unit_interval() {
    let x = cloud(1, 200, 3);
    let model = fit_isolation_forest(&x, 50, 64, 7).unwrap();
    for s in score_rows(&model, &x).unwrap() {
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
    assert!(matches!(anomaly_score(&model, &[0.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn planted_outlier_tops_the_ranking_after_rescaling() {
    let mut x = cloud(2, 150, 2);
    x.push_row(&[8.0, -9.0]).unwrap();
    let planted = x.rows() - 1;
    for (scale, shift) in [(1.0, 0.0), (1000.0, -3.0), (0.001, 50.0)] {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| r.iter().map(|v| v * scale + shift).collect()).collect();
        let xs = Matrix::from_rows(&rows).unwrap();
        let model = fit_isolation_forest(&xs, 100, 128, 3).unwrap();
        let scores = score_rows(&model, &xs).unwrap();
        let top = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(top, planted, "scale {scale}");
    }
}

#[test]
fn zero_contamination_removes_nothing() {
    let ds = imbalanced(3, &[30, 20, 10]);
    let out = filter_class_outliers(&ds, &ContaminationSpec::uniform(0.0), 50, 1).unwrap();
    assert_eq!(out, ds);
}

#[test]
fn contamination_removes_floor_of_fraction_per_class() {
    let ds = imbalanced(4, &[100, 40, 9]);
    let spec = ContaminationSpec::uniform(0.1);
    let out = filter_class_outliers(&ds, &spec, 50, 1).unwrap();
    let counts = out.class_counts();
    assert_eq!(counts[&0], 90);
    assert_eq!(counts[&1], 36);
    assert_eq!(counts[&2], 9);
    assert_eq!(removal_count(0.07, 100), 7);
    assert!(matches!(
        filter_class_outliers(&ds, &ContaminationSpec::uniform(1.0), 10, 1),
        Err(Error::Config(_))
    ));
}

#[test]
fn smote_balances_and_is_deterministic() {
    let ds = imbalanced(5, &[40, 12, 5]);
    let a = smote(&ds, 5, 9).unwrap();
    assert_eq!(a, smote(&ds, 5, 9).unwrap());
    assert!(a.class_counts().values().all(|&n| n == 40));
    assert_eq!(&a.row_ids[..ds.len()], &ds.row_ids[..]);
}

#[test]
fn smote_needs_two_rows_per_minority_class() {
    let ds = imbalanced(6, &[10, 1]);
    match smote(&ds, 5, 0) {
        Err(Error::ClassTooSmall { size: 1, needed: 2, .. }) => {}
        other => panic!("expected ClassTooSmall, got {other:?}"),
    }
}

#[test]
fn tomek_cleaning_reaches_a_fixed_point() {
    let ds = imbalanced(7, &[50, 50, 50]);
    for policy in [TomekPolicy::RemoveBoth, TomekPolicy::RemoveMajority] {
        let clean = remove_tomek_links(&ds, policy);
        assert!(tomek_links(&clean).is_empty());
        assert!(clean.len() <= ds.len());
    }
    let pair = Dataset::from_rows(&[[0.0], [1.0], [5.0], [5.5]], vec![0, 1, 0, 0]).unwrap();
    assert_eq!(tomek_links(&pair), vec![(0, 1)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthetic_rows_lie_between_class_members(seed in any::<u64>(), small in 2usize..8, k in 1usize..6) {
        let ds = imbalanced(seed, &[20, small]);
        let out = smote(&ds, k, seed).unwrap();
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == 1).collect();
        for s in ds.len()..out.len() {
            prop_assert_eq!(out.y[s], 1);
            let p = out.x.row(s);
            let found = members.iter().any(|&a| members.iter().any(|&b| a != b && on_segment(p, ds.x.row(a), ds.x.row(b))));
            prop_assert!(found, "synthetic row {} is not on a segment between class members", s);
        }
    }

    #[test]
    fn permuting_input_keeps_real_rows(seed in any::<u64>()) {
        let ds = imbalanced(seed, &[25, 10, 6]);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted = ds.subset(&order);
        let a = smote(&ds, 3, 1).unwrap();
        let b = smote(&permuted, 3, 1).unwrap();
        let key = |d: &Dataset, n: usize| {
            let mut v: Vec<(String, usize)> = (0..n).map(|i| (format!("{:?}", d.x.row(i)), d.y[i])).collect();
            v.sort();
            v
        };
        prop_assert_eq!(key(&a, ds.len()), key(&b, ds.len()));
        prop_assert_eq!(a.class_counts(), b.class_counts());
    }

    #[test]
    fn smote_tomek_never_grows_past_balance(seed in any::<u64>()) {
        let ds = imbalanced(seed, &[30, 8, 4]);
        let out = smote_tomek(&ds, 5, seed).unwrap();
        prop_assert!(out.class_counts().values().all(|&n| n <= 30));
        prop_assert!(tomek_links(&out).is_empty());
    }
}
