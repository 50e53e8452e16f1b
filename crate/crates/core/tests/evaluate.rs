use oss_lifecycle::evaluate::{
    classification_report, confusion_matrix, macro_f1, render_report, round_half_even, ConfusionMatrix,
};
use oss_lifecycle::Error;
use proptest::prelude::*;

/// Per-class (precision, recall, f1, support) straight from the label vectors.
fn oracle(y_true: &[usize], y_pred: &[usize], class: usize) -> (f64, f64, f64, usize) {
    let tp = y_true.iter().zip(y_pred).filter(|(t, p)| **t == class && **p == class).count();
    let predicted = y_pred.iter().filter(|p| **p == class).count();
    let support = y_true.iter().filter(|t| **t == class).count();
    let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
    let r = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f, support)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn report_matches_the_fixed_matrix() {
    let m = ConfusionMatrix::from_counts(vec![2, 1, 0], vec![vec![3, 0, 1], vec![0, 5, 1], vec![0, 1, 20]])
        .unwrap()
        .with_names(["graduated", "incubating", "sandbox"]);
    let r = classification_report(&m).unwrap();
    assert_eq!(r.total, 31);
    assert!(close(r.accuracy, 28.0 / 31.0));
    assert!(close(r.classes[0].precision, 1.0));
    assert!(close(r.classes[0].recall, 0.75));
    assert!(close(r.classes[2].precision, 20.0 / 22.0));
    let text = render_report(&r);
    assert!(text.contains("graduated"), "{text}");
    assert!(text.contains("0.90"), "{text}");
}

#[test]
fn empty_matrix_is_an_error() {
    let m = ConfusionMatrix::from_counts(vec![0, 1], vec![vec![0, 0], vec![0, 0]]).unwrap();
    assert!(matches!(classification_report(&m), Err(Error::EmptyMatrix)));
}

#[test]
fn half_even_rounding() {
    assert_eq!(round_half_even(0.125, 2), "0.12");
    assert_eq!(round_half_even(0.135, 2), "0.14");
    assert_eq!(round_half_even(0.5, 0), "0");
    assert_eq!(round_half_even(1.5, 0), "2");
    assert_eq!(round_half_even(0.903_225_806, 4), "0.9032");
}

#[test]
fn undefined_precision_is_flagged() {
    let m = confusion_matrix(&[0, 0, 1], &[0, 0, 0], &[0, 1]).unwrap();
    let r = classification_report(&m).unwrap();
    assert!(r.classes[1].precision_undefined);
    assert_eq!(r.classes[1].precision, 0.0);
    assert!(!r.classes[0].precision_undefined);
}

fn pairs() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((0usize..3, 0usize..3), 1..120).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn report_agrees_with_direct_counts((t, p) in pairs()) {
        let labels = [0, 1, 2];
        let r = classification_report(&confusion_matrix(&t, &p, &labels).unwrap()).unwrap();
        for (i, &c) in labels.iter().enumerate() {
            let (pr, re, f1, sup) = oracle(&t, &p, c);
            prop_assert!(close(r.classes[i].precision, pr));
            prop_assert!(close(r.classes[i].recall, re));
            prop_assert!(close(r.classes[i].f1, f1));
            prop_assert_eq!(r.classes[i].support as usize, sup);
        }
        let n = t.len() as f64;
        let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64;
        prop_assert!(close(r.accuracy, hits / n));
        let weighted: f64 = labels.iter().map(|&c| { let o = oracle(&t, &p, c); o.2 * o.3 as f64 }).sum::<f64>() / n;
        prop_assert!(close(r.weighted_avg.f1, weighted));
    }

    #[test]
    fn micro_precision_and_recall_equal_accuracy((t, p) in pairs()) {
        let m = confusion_matrix(&t, &p, &[0, 1, 2]).unwrap();
        let r = classification_report(&m).unwrap();
        let tp: u64 = (0..3).map(|i| m.counts[i][i]).sum();
        let predicted: u64 = (0..3).map(|c| (0..3).map(|row| m.counts[row][c]).sum::<u64>()).sum();
        let actual: u64 = (0..3).map(|row| m.counts[row].iter().sum::<u64>()).sum();
        prop_assert!(close(tp as f64 / predicted as f64, r.accuracy));
        prop_assert!(close(tp as f64 / actual as f64, r.accuracy));
    }

    #[test]
    fn label_order_only_permutes_rows((t, p) in pairs()) {
        let a = classification_report(&confusion_matrix(&t, &p, &[0, 1, 2]).unwrap()).unwrap();
        let b = classification_report(&confusion_matrix(&t, &p, &[2, 0, 1]).unwrap()).unwrap();
        for cb in &b.classes {
            let ca = a.classes.iter().find(|c| c.label == cb.label).unwrap();
            prop_assert!(close(ca.f1, cb.f1) && close(ca.precision, cb.precision) && ca.support == cb.support);
        }
        prop_assert!(close(a.macro_avg.f1, b.macro_avg.f1));
        prop_assert!(close(a.weighted_avg.recall, b.weighted_avg.recall));
        prop_assert!(close(a.accuracy, b.accuracy));
    }

    #[test]
    fn macro_f1_over_present_labels((t, p) in pairs()) {
        let mut present: Vec<usize> = t.iter().chain(&p).copied().collect();
        present.sort_unstable();
        present.dedup();
        let expect = present.iter().map(|&c| oracle(&t, &p, c).2).sum::<f64>() / present.len() as f64;
        prop_assert!(close(macro_f1(&t, &p), expect));
    }
}
