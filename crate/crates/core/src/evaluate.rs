//! Confusion matrices, per-class metrics and the fixed-layout text report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::class_name;

/// Rows are true classes, columns predicted classes, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<usize>,
    pub names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Matrix from raw counts; names default to the lifecycle stage names.
    pub fn from_counts(labels: Vec<usize>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k {
            return Err(Error::LengthMismatch(counts.len(), k));
        }
        if let Some(r) = counts.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch(r.len(), k));
        }
        let names = labels.iter().map(|&l| class_name(l)).collect();
        Ok(Self { labels, names, counts })
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() == self.labels.len() {
            self.names = names;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let pos = |v: usize| labels.iter().position(|&l| l == v).ok_or(Error::UnknownLabel(v));
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    ConfusionMatrix::from_counts(labels.to_vec(), counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the metric's denominator was zero and 0 was reported.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
    pub confusion_matrix: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_report(m: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let k = m.labels.len();
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = m.counts[i][i];
            let support: u64 = m.counts[i].iter().sum();
            let predicted: u64 = (0..k).map(|r| m.counts[r][i]).sum();
            let (precision, pu) = ratio(tp, predicted);
            let (recall, ru) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: m.labels[i],
                name: m.names[i].clone(),
                precision,
                recall,
                f1,
                support,
                precision_undefined: pu,
                recall_undefined: ru,
            }
        })
        .collect();
    let kf = k as f64;
    let tf = total as f64;
    let macro_avg = Averages {
        precision: classes.iter().map(|c| c.precision).sum::<f64>() / kf,
        recall: classes.iter().map(|c| c.recall).sum::<f64>() / kf,
        f1: classes.iter().map(|c| c.f1).sum::<f64>() / kf,
        support: total,
    };
    let w = |f: fn(&ClassMetrics) -> f64| classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / tf;
    let weighted_avg = Averages {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f1: w(|c| c.f1),
        support: total,
    };
    Ok(ClassificationReport {
        accuracy: m.trace() as f64 / tf,
        classes,
        macro_avg,
        weighted_avg,
        total,
        confusion_matrix: m.clone(),
    })
}

/// Macro-averaged F1 over the labels present in either vector.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize]) -> f64 {
    let mut labels: Vec<usize> = y_true.iter().chain(y_pred).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    confusion_matrix(y_true, y_pred, &labels)
        .and_then(|m| classification_report(&m))
        .map_or(0.0, |r| r.macro_avg.f1)
}

/// Rounds to `places` decimals, half to even, working on the shortest decimal
/// representation of `v` so that 0.845 becomes "0.84" and 0.835 "0.84".
pub fn round_half_even(v: f64, places: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let neg = v < 0.0;
    let s = format!("{}", v.abs());
    let (int_part, frac_part) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits: Vec<u8> = int_part.bytes().chain(frac_part.bytes()).map(|b| b - b'0').collect();
    let int_len = int_part.len();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let keep = int_len + places;
    digits.resize(keep.max(digits.len()), 0);
    let rest = &frac[places.min(frac.len())..];
    let round_up = match rest.first() {
        None => false,
        Some(&d) if d > 5 => true,
        Some(&d) if d < 5 => false,
        Some(_) => {
            if rest[1..].iter().any(|&d| d > 0) {
                true
            } else {
                keep > 0 && digits[keep - 1] % 2 == 1
            }
        }
    };
    digits.truncate(keep);
    if round_up {
        let mut i = keep;
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let mut out = String::new();
    if neg && digits.iter().any(|&d| d > 0) {
        out.push('-');
    }
    for d in &digits[..split] {
        out.push((b'0' + d) as char);
    }
    if out.is_empty() || out == "-" {
        out.push('0');
    }
    if places > 0 {
        out.push('.');
        for d in &digits[split..] {
            out.push((b'0' + d) as char);
        }
    }
    out
}

/// Fixed-width text table: one row per class, then accuracy, macro and
/// weighted averages. Metrics print at two decimals.
pub fn render_report(r: &ClassificationReport) -> String {
    let f = |v: f64| round_half_even(v, 2);
    let width = r
        .classes
        .iter()
        .map(|c| c.name.len())
        .chain(["Weighted avg".len()])
        .max()
        .unwrap_or(12);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}",
        "Class", "Precision", "Recall", "F1-score", "Support"
    );
    for c in &r.classes {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}",
            c.name,
            f(c.precision),
            f(c.recall),
            f(c.f1),
            c.support
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}",
        "Accuracy",
        "",
        "",
        f(r.accuracy),
        r.total
    );
    for (name, a) in [("Macro avg", &r.macro_avg), ("Weighted avg", &r.weighted_avg)] {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}",
            name,
            f(a.precision),
            f(a.recall),
            f(a.f1),
            a.support
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.845, 2), "0.84");
        assert_eq!(round_half_even(0.835, 2), "0.84");
        assert_eq!(round_half_even(0.8451, 2), "0.85");
        assert_eq!(round_half_even(0.995, 2), "1.00");
        assert_eq!(round_half_even(1.0, 2), "1.00");
        assert_eq!(round_half_even(0.0, 2), "0.00");
        assert_eq!(round_half_even(0.9032258064516129, 2), "0.90");
        assert_eq!(round_half_even(12.5, 0), "12");
    }

    #[test]
    fn diagonal_and_single_column() {
        let y = [0, 1, 2, 1, 0];
        let m = confusion_matrix(&y, &y, &[0, 1, 2]).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        let r = classification_report(&m).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_avg.f1, 1.0);

        let m = confusion_matrix(&y, &[1; 5], &[0, 1, 2]).unwrap();
        assert!(m.counts.iter().all(|r| r[0] == 0 && r[2] == 0));
        let r = classification_report(&m).unwrap();
        assert_eq!(r.classes[0].precision, 0.0);
        assert!(r.classes[0].precision_undefined);
    }

    #[test]
    fn unknown_label_and_length() {
        assert!(matches!(confusion_matrix(&[0, 5], &[0, 0], &[0, 1]), Err(Error::UnknownLabel(5))));
        assert!(matches!(confusion_matrix(&[0], &[0, 0], &[0]), Err(Error::LengthMismatch(1, 2))));
        let m = ConfusionMatrix::from_counts(vec![0], vec![vec![0]]).unwrap();
        assert!(matches!(classification_report(&m), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn weighted_recall_is_accuracy() {
        let m = ConfusionMatrix::from_counts(vec![2, 1, 0], vec![vec![3, 0, 1], vec![0, 5, 1], vec![0, 1, 20]]).unwrap();
        let r = classification_report(&m).unwrap();
        assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-9);
        let text = render_report(&r);
        assert!(text.lines().next().unwrap().contains("Precision"));
        assert!(text.contains("0.90"));
    }
}
