//! Project-health metrics computed from a [`ProjectEventLog`], and the
//! feature table that carries them between stages.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::ingest::{identity_key, is_bot, IssueRecord, ProjectEventLog};

/// CNCF maturity level. Integer codes are stable and used for persistence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifecycleStage {
    Sandbox = 0,
    Incubating = 1,
    Graduated = 2,
}

impl LifecycleStage {
    pub const ALL: [LifecycleStage; 3] = [Self::Sandbox, Self::Incubating, Self::Graduated];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sandbox => "sandbox",
            Self::Incubating => "incubating",
            Self::Graduated => "graduated",
        }
    }
}

impl fmt::Display for LifecycleStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LifecycleStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "sandbox" => Ok(Self::Sandbox),
            "incubating" => Ok(Self::Incubating),
            "graduated" | "grads" | "graduation" => Ok(Self::Graduated),
            other => Err(Error::UnknownStage(other.to_owned())),
        }
    }
}

/// Display name for a class code; stage names where they apply.
pub fn class_name(code: usize) -> String {
    LifecycleStage::from_code(code).map_or_else(|| code.to_string(), |s| s.name().to_owned())
}

/// Canonical metric columns, in their fixed order.
pub const METRIC_NAMES: [&str; 21] = [
    "commits",
    "pr_count",
    "pr_total_files",
    "pr_average_commits",
    "pr_total_commits",
    "pr_total_comments",
    "pr_review_duration_in_hours",
    "total_issue_duration",
    "avg_comment_count_issue",
    "total_comment_count_issue",
    "comments_per_issue",
    "avg_ttfr_hours",
    "contributor_count",
    "new_contributor_count",
    "committer_count",
    "bus_factor",
    "release_count",
    "fork_count",
    "watchers_count",
    "stars_count",
    "dependency_count",
];

pub fn metric_index(name: &str) -> Option<usize> {
    METRIC_NAMES.iter().position(|m| *m == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub recency_days: i64,
    pub bus_factor_threshold: f64,
    /// Drop identities ending in `[bot]` from contributor-derived metrics.
    pub exclude_bots: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            recency_days: 365,
            bus_factor_threshold: 0.5,
            exclude_bots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub repo_id: String,
    pub values: Vec<(String, f64)>,
    pub label: Option<LifecycleStage>,
}

impl FeatureVector {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == metric).map(|(_, v)| *v)
    }
}

fn hours(d: Duration) -> f64 {
    d.num_milliseconds() as f64 / 3_600_000.0
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Every (identity key, timestamp) authorship event in the log.
fn authorship_events(log: &ProjectEventLog) -> Vec<(&str, DateTime<Utc>)> {
    let mut out: Vec<(&str, DateTime<Utc>)> = Vec::new();
    out.extend(log.commits.iter().map(|c| (c.author_id.as_str(), c.authored_at)));
    for p in &log.pull_requests {
        out.push((p.author_id.as_str(), p.created_at));
        for a in p.comments.iter().chain(&p.reviews).chain(&p.review_comments) {
            out.push((a.author_id.as_str(), a.timestamp));
        }
    }
    for i in &log.issues {
        out.push((i.author_id.as_str(), i.created_at));
        out.extend(i.comments.iter().map(|a| (a.author_id.as_str(), a.timestamp)));
    }
    out
}

/// Smallest number of authors whose combined commits reach `threshold` of the total,
/// taking authors greedily by descending count.
pub fn bus_factor<K>(author_commit_counts: &HashMap<K, u64>, threshold: f64) -> Result<u64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let mut counts: Vec<u64> = author_commit_counts.values().copied().collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(0);
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let target = threshold * total as f64;
    let mut acc = 0u64;
    for (i, c) in counts.iter().enumerate() {
        acc += c;
        if acc as f64 >= target {
            return Ok(i as u64 + 1);
        }
    }
    Ok(counts.len() as u64)
}

/// Distinct identities whose first authorship event falls within the last
/// `recency_days` of the window.
pub fn new_contributor_count(log: &ProjectEventLog, recency_days: i64, exclude_bots: bool) -> u64 {
    let cutoff = log.window_end - Duration::days(recency_days);
    let mut first: HashMap<String, DateTime<Utc>> = HashMap::new();
    for (author, t) in authorship_events(log) {
        if exclude_bots && is_bot(author) {
            continue;
        }
        first
            .entry(identity_key(author))
            .and_modify(|f| *f = (*f).min(t))
            .or_insert(t);
    }
    first.values().filter(|t| **t >= cutoff).count() as u64
}

/// Mean hours from issue creation to the first comment by someone other than the
/// author, over issues that have such a comment.
pub fn avg_time_to_first_response(issues: &[IssueRecord]) -> f64 {
    let responses: Vec<f64> = issues
        .iter()
        .filter_map(|issue| {
            let author = identity_key(&issue.author_id);
            issue
                .comments
                .iter()
                .filter(|c| identity_key(&c.author_id) != author)
                .map(|c| c.timestamp)
                .min()
                .map(|t| hours(t - issue.created_at))
        })
        .collect();
    ratio(responses.iter().sum(), responses.len())
}

pub fn compute_features(log: &ProjectEventLog, opts: &FeatureOptions) -> Result<FeatureVector> {
    let counts_person = |id: &str| !(opts.exclude_bots && is_bot(id));

    let prs = &log.pull_requests;
    let pr_count = prs.len();
    let pr_total_files: usize = prs
        .iter()
        .map(|p| p.files.iter().collect::<HashSet<_>>().len())
        .sum();
    let pr_total_commits: usize = prs.iter().map(|p| p.commit_shas.len()).sum();
    let pr_total_comments: usize = prs
        .iter()
        .map(|p| p.comments.len() + p.review_comments.len())
        .sum();
    let closed: Vec<f64> = prs
        .iter()
        .filter_map(|p| p.closed_at.map(|c| hours(c - p.created_at)))
        .collect();
    let pr_review_duration = ratio(closed.iter().sum(), closed.len());

    let issues = &log.issues;
    let total_issue_duration: f64 = issues
        .iter()
        .map(|i| hours(i.closed_at.unwrap_or(log.window_end) - i.created_at))
        .sum();
    let total_issue_comments: usize = issues.iter().map(|i| i.comments.len()).sum();
    let comments_per_issue = median(issues.iter().map(|i| i.comments.len() as f64).collect());

    let contributors: HashSet<String> = authorship_events(log)
        .into_iter()
        .filter(|(a, _)| counts_person(a))
        .map(|(a, _)| identity_key(a))
        .collect();
    let mut commit_counts: HashMap<String, u64> = HashMap::new();
    for c in log.commits.iter().filter(|c| counts_person(&c.author_id)) {
        *commit_counts.entry(identity_key(&c.author_id)).or_insert(0) += 1;
    }

    let values = [
        log.commits.len() as f64,
        pr_count as f64,
        pr_total_files as f64,
        ratio(pr_total_commits as f64, pr_count),
        pr_total_commits as f64,
        pr_total_comments as f64,
        pr_review_duration,
        total_issue_duration,
        ratio(total_issue_comments as f64, issues.len()),
        total_issue_comments as f64,
        comments_per_issue,
        avg_time_to_first_response(issues),
        contributors.len() as f64,
        new_contributor_count(log, opts.recency_days, opts.exclude_bots) as f64,
        commit_counts.len() as f64,
        bus_factor(&commit_counts, opts.bus_factor_threshold)? as f64,
        log.releases.len() as f64,
        log.fork_count as f64,
        log.watchers_count as f64,
        log.stars_count as f64,
        log.dependencies.len() as f64,
    ];
    Ok(FeatureVector {
        repo_id: log.repo_id.clone(),
        values: METRIC_NAMES
            .iter()
            .zip(values)
            .map(|(n, v)| ((*n).to_owned(), v))
            .collect(),
        label: None,
    })
}

/// Feature rows with their repo ids and optional labels. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub repo_ids: Vec<String>,
    pub x: Matrix,
    pub labels: Vec<Option<LifecycleStage>>,
}

pub fn features_to_table(rows: &[FeatureVector]) -> Result<FeatureTable> {
    let columns: Vec<String> = match rows.first() {
        Some(r) => r.values.iter().map(|(n, _)| n.clone()).collect(),
        None => METRIC_NAMES.iter().map(|s| (*s).to_owned()).collect(),
    };
    let mut x = Matrix::zeros(0, columns.len());
    for r in rows {
        let names: Vec<&str> = r.values.iter().map(|(n, _)| n.as_str()).collect();
        if names.len() != columns.len() || names.iter().zip(&columns).any(|(a, b)| a != b) {
            return Err(Error::ColumnMismatch(format!(
                "{} has columns [{}]",
                r.repo_id,
                names.join(",")
            )));
        }
        let vals: Vec<f64> = r.values.iter().map(|(_, v)| *v).collect();
        x.push_row(&vals)?;
    }
    Ok(FeatureTable {
        columns,
        repo_ids: rows.iter().map(|r| r.repo_id.clone()).collect(),
        x,
        labels: rows.iter().map(|r| r.label).collect(),
    })
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_cell(s: &str) -> std::result::Result<f64, std::num::ParseFloatError> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        Ok(f64::NAN)
    } else {
        t.parse()
    }
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.repo_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repo_ids.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// CSV with header `repo_id,<metrics...>,label`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["repo_id".to_owned()];
        header.extend(self.columns.iter().cloned());
        header.push("label".into());
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.repo_ids[i].clone()];
            rec.extend(self.x.row(i).iter().map(|v| format_cell(*v)));
            rec.push(self.labels[i].map(|l| l.name().to_owned()).unwrap_or_default());
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let id_col = header
            .iter()
            .position(|h| h == "repo_id")
            .ok_or_else(|| Error::ColumnMismatch("missing `repo_id` column".into()))?;
        let label_col = header.iter().position(|h| h == "label");
        let feature_cols: Vec<usize> = (0..header.len())
            .filter(|&j| j != id_col && Some(j) != label_col)
            .collect();
        let columns = feature_cols.iter().map(|&j| header[j].to_owned()).collect();
        let mut x = Matrix::zeros(0, feature_cols.len());
        let mut repo_ids = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let schema = |message: String| Error::Schema {
                file: "<feature table>".into(),
                line: line + 2,
                message,
            };
            let mut row = Vec::with_capacity(feature_cols.len());
            for &j in &feature_cols {
                let cell = rec.get(j).unwrap_or("");
                row.push(parse_cell(cell).map_err(|e| schema(format!("{}: {e}", &header[j])))?);
            }
            x.push_row(&row)?;
            repo_ids.push(rec.get(id_col).unwrap_or("").to_owned());
            let label = match label_col.and_then(|j| rec.get(j)).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse()?),
            };
            labels.push(label);
        }
        Ok(Self {
            columns,
            repo_ids,
            x,
            labels,
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(io::BufWriter::new(f))
    }

    /// Joins a two-column `repo_id,label` CSV onto the table. Repos absent from
    /// the labels file keep their current label.
    pub fn attach_labels<R: io::Read>(&mut self, r: R) -> Result<()> {
        let mut rd = csv::Reader::from_reader(r);
        let mut map = HashMap::new();
        for rec in rd.records() {
            let rec = rec?;
            let id = rec.get(0).unwrap_or("").trim().to_owned();
            let stage: LifecycleStage = rec.get(1).unwrap_or("").parse()?;
            map.insert(id, stage);
        }
        for (id, label) in self.repo_ids.iter().zip(self.labels.iter_mut()) {
            if let Some(s) = map.get(id) {
                *label = Some(*s);
            }
        }
        Ok(())
    }

    /// Labeled dataset over all columns; fails on unlabeled rows.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let y = self
            .labels
            .iter()
            .zip(&self.repo_ids)
            .map(|(l, id)| l.map(LifecycleStage::code).ok_or_else(|| Error::UnlabeledRow(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.x.clone(), y, self.columns.clone(), self.repo_ids.clone())
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            columns: ds.column_names.clone(),
            repo_ids: ds.row_ids.clone(),
            x: ds.x.clone(),
            labels: ds.y.iter().map(|&c| LifecycleStage::from_code(c)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{rfc3339, Activity, CommitRecord};

    fn ts(s: &str) -> DateTime<Utc> {
        rfc3339::parse(s).unwrap()
    }

    fn counts(v: &[u64]) -> HashMap<usize, u64> {
        v.iter().copied().enumerate().collect()
    }

    #[test]
    fn bus_factor_examples() {
        assert_eq!(bus_factor(&counts(&[50, 30, 20]), 0.5).unwrap(), 1);
        assert_eq!(bus_factor(&counts(&[25, 25, 25, 25]), 0.5).unwrap(), 2);
        assert_eq!(bus_factor(&counts(&[]), 0.5).unwrap(), 0);
        assert_eq!(bus_factor(&counts(&[0, 0]), 0.5).unwrap(), 0);
        assert!(matches!(bus_factor(&counts(&[1]), 0.0), Err(Error::InvalidThreshold(_))));
        assert!(bus_factor(&counts(&[1]), 1.5).is_err());
    }

    #[test]
    fn empty_log_all_zero() {
        let log = ProjectEventLog::empty("o/r", ts("2023-01-01T00:00:00Z"), ts("2023-12-31T00:00:00Z"));
        let fv = compute_features(&log, &FeatureOptions::default()).unwrap();
        assert_eq!(fv.values.len(), 21);
        assert!(fv.values.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn ttfr_single_issue() {
        let issue = IssueRecord {
            number: 1,
            author_id: "a".into(),
            created_at: ts("2023-01-01T00:00:00Z"),
            closed_at: None,
            comments: vec![Activity::new("b", ts("2023-01-01T12:00:00Z"))],
        };
        assert_eq!(avg_time_to_first_response(&[issue]), 12.0);
    }

    #[test]
    fn ttfr_mean_and_self_response() {
        let mk = |n, author: &str, comments: Vec<Activity>| IssueRecord {
            number: n,
            author_id: author.into(),
            created_at: ts("2023-01-01T00:00:00Z"),
            closed_at: None,
            comments,
        };
        let issues = vec![
            mk(1, "a", vec![Activity::new("b", ts("2023-01-01T02:00:00Z"))]),
            mk(2, "a", vec![Activity::new("c", ts("2023-01-01T04:00:00Z"))]),
            mk(3, "a", vec![Activity::new("A", ts("2023-01-01T01:00:00Z"))]),
        ];
        assert_eq!(avg_time_to_first_response(&issues), 3.0);
        assert_eq!(avg_time_to_first_response(&[]), 0.0);
    }

    fn commit(sha: &str, author: &str, at: &str) -> CommitRecord {
        CommitRecord {
            sha: sha.into(),
            author_id: author.into(),
            authored_at: ts(at),
            files_changed: 1,
        }
    }

    #[test]
    fn new_contributor_first_time_semantics() {
        let mut log = ProjectEventLog::empty("o/r", ts("2020-01-01T00:00:00Z"), ts("2023-12-31T00:00:00Z"));
        log.commits = vec![
            commit("1", "old", "2020-02-01T00:00:00Z"),
            commit("2", "old", "2023-12-01T00:00:00Z"),
            commit("3", "Fresh", "2023-11-01T00:00:00Z"),
            commit("4", "fresh", "2023-11-02T00:00:00Z"),
        ];
        assert_eq!(new_contributor_count(&log, 365, true), 1);
        assert_eq!(new_contributor_count(&log, 10, true), 0);
    }

    #[test]
    fn table_column_mismatch() {
        let a = FeatureVector {
            repo_id: "a".into(),
            values: vec![("x".into(), 1.0)],
            label: None,
        };
        let b = FeatureVector {
            repo_id: "b".into(),
            values: vec![("y".into(), 1.0)],
            label: None,
        };
        assert!(matches!(features_to_table(&[a, b]), Err(Error::ColumnMismatch(_))));
    }

    #[test]
    fn empty_table_has_canonical_header() {
        let t = features_to_table(&[]).unwrap();
        assert_eq!(t.x.rows(), 0);
        assert_eq!(t.columns.len(), 21);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("repo_id,commits,"));
        assert!(text.trim_end().ends_with(",label"));
    }

    #[test]
    fn labels_join_rejects_unknown() {
        let fv = FeatureVector {
            repo_id: "o/a".into(),
            values: vec![("x".into(), 1.0)],
            label: None,
        };
        let mut t = features_to_table(&[fv]).unwrap();
        t.attach_labels("repo_id,label\no/a,incubating\n".as_bytes()).unwrap();
        assert_eq!(t.labels[0], Some(LifecycleStage::Incubating));
        assert!(t.attach_labels("repo_id,label\no/a,archived\n".as_bytes()).is_err());
    }

    #[test]
    fn stage_codes_stable() {
        assert_eq!(LifecycleStage::Sandbox.code(), 0);
        assert_eq!(LifecycleStage::Incubating.code(), 1);
        assert_eq!(LifecycleStage::Graduated.code(), 2);
        assert_eq!("Graduated".parse::<LifecycleStage>().unwrap(), LifecycleStage::Graduated);
    }
}
