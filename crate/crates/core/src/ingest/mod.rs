//! Repository event logs: the canonical in-memory form, its on-disk archive
//! layout, an HTTP fetcher, and invariant checking.

mod archive;
mod fetch;
mod validate;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use archive::{load_archive, write_archive};
pub use fetch::{fetch_project, FetchOptions};
pub use validate::{validate_log, Violation};

/// Authorship of a comment, review or review comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub author_id: String,
    #[serde(with = "rfc3339")]
    pub timestamp: DateTime<Utc>,
}

impl Activity {
    pub fn new(author_id: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self {
            author_id: author_id.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub sha: String,
    pub author_id: String,
    #[serde(with = "rfc3339")]
    pub authored_at: DateTime<Utc>,
    pub files_changed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequestRecord {
    pub number: u64,
    pub author_id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(with = "rfc3339::option", default)]
    pub closed_at: Option<DateTime<Utc>>,
    pub merged: bool,
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub commit_shas: Vec<String>,
    #[serde(default)]
    pub comments: Vec<Activity>,
    #[serde(default)]
    pub reviews: Vec<Activity>,
    #[serde(default)]
    pub review_comments: Vec<Activity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub number: u64,
    pub author_id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(with = "rfc3339::option", default)]
    pub closed_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub comments: Vec<Activity>,
}

/// Everything recorded for one repository over an observation window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectEventLog {
    pub repo_id: String,
    #[serde(with = "rfc3339")]
    pub window_start: DateTime<Utc>,
    #[serde(with = "rfc3339")]
    pub window_end: DateTime<Utc>,
    pub commits: Vec<CommitRecord>,
    pub pull_requests: Vec<PullRequestRecord>,
    pub issues: Vec<IssueRecord>,
    #[serde(with = "rfc3339::vec")]
    pub releases: Vec<DateTime<Utc>>,
    pub stars_count: u64,
    pub fork_count: u64,
    pub watchers_count: u64,
    pub dependencies: Vec<String>,
}

impl ProjectEventLog {
    pub fn empty(repo_id: impl Into<String>, start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        Self {
            repo_id: repo_id.into(),
            window_start: start,
            window_end: end,
            commits: Vec::new(),
            pull_requests: Vec::new(),
            issues: Vec::new(),
            releases: Vec::new(),
            stars_count: 0,
            fork_count: 0,
            watchers_count: 0,
            dependencies: Vec::new(),
        }
    }

    /// All event timestamps in the log, in no particular order.
    pub fn event_timestamps(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        let commits = self.commits.iter().map(|c| c.authored_at);
        let prs = self.pull_requests.iter().flat_map(|p| {
            std::iter::once(p.created_at)
                .chain(p.closed_at)
                .chain(p.comments.iter().map(|a| a.timestamp))
                .chain(p.reviews.iter().map(|a| a.timestamp))
                .chain(p.review_comments.iter().map(|a| a.timestamp))
        });
        let issues = self.issues.iter().flat_map(|i| {
            std::iter::once(i.created_at)
                .chain(i.closed_at)
                .chain(i.comments.iter().map(|a| a.timestamp))
        });
        commits
            .chain(prs)
            .chain(issues)
            .chain(self.releases.iter().copied())
    }

    /// Moves the window end to `cutoff`. Events after the cutoff are dropped;
    /// items closed after it are reopened. Snapshot counts are kept as-is.
    pub fn with_window_end(mut self, cutoff: DateTime<Utc>) -> Self {
        self.commits.retain(|c| c.authored_at <= cutoff);
        self.pull_requests = self
            .pull_requests
            .into_iter()
            .filter_map(|p| truncate_pull_request(p, cutoff))
            .collect();
        self.issues = self
            .issues
            .into_iter()
            .filter_map(|i| truncate_issue(i, cutoff))
            .collect();
        self.releases.retain(|r| *r <= cutoff);
        self.window_end = cutoff;
        if self.window_start > cutoff {
            self.window_start = cutoff;
        }
        self
    }
}

pub(crate) fn truncate_pull_request(
    mut p: PullRequestRecord,
    cutoff: DateTime<Utc>,
) -> Option<PullRequestRecord> {
    if p.created_at > cutoff {
        return None;
    }
    if p.closed_at.is_some_and(|c| c > cutoff) {
        p.closed_at = None;
        p.merged = false;
    }
    p.comments.retain(|a| a.timestamp <= cutoff);
    p.reviews.retain(|a| a.timestamp <= cutoff);
    p.review_comments.retain(|a| a.timestamp <= cutoff);
    Some(p)
}

pub(crate) fn truncate_issue(mut i: IssueRecord, cutoff: DateTime<Utc>) -> Option<IssueRecord> {
    if i.created_at > cutoff {
        return None;
    }
    if i.closed_at.is_some_and(|c| c > cutoff) {
        i.closed_at = None;
    }
    i.comments.retain(|a| a.timestamp <= cutoff);
    Some(i)
}

/// Canonical identity key: exact string after lowercasing.
pub fn identity_key(author_id: &str) -> String {
    author_id.to_lowercase()
}

pub fn is_bot(author_id: &str) -> bool {
    author_id.to_lowercase().ends_with("[bot]")
}

/// RFC 3339 UTC timestamps with a `Z` suffix and only as many fractional
/// digits as needed.
pub mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(ts: &DateTime<Utc>) -> String {
        ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|d| d.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(
            ts: &Option<DateTime<Utc>>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            match ts {
                Some(t) => s.serialize_some(&format(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DateTime<Utc>>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|raw| parse(&raw).map_err(serde::de::Error::custom))
                .transpose()
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(ts: &[DateTime<Utc>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(ts.len()))?;
            for t in ts {
                seq.serialize_element(&format(t))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Vec<DateTime<Utc>>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|raw| parse(raw).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> DateTime<Utc> {
        rfc3339::parse(s).unwrap()
    }

    #[test]
    fn timestamps_format_with_z() {
        assert_eq!(
            rfc3339::format(&ts("2023-01-01T05:00:00+05:00")),
            "2023-01-01T00:00:00Z"
        );
        assert_eq!(
            rfc3339::format(&ts("2023-01-01T00:00:00.250Z")),
            "2023-01-01T00:00:00.250Z"
        );
    }

    #[test]
    fn window_truncation_reopens_late_closures() {
        let mut log = ProjectEventLog::empty("o/r", ts("2020-01-01T00:00:00Z"), ts("2024-06-01T00:00:00Z"));
        log.issues.push(IssueRecord {
            number: 1,
            author_id: "a".into(),
            created_at: ts("2023-06-01T00:00:00Z"),
            closed_at: Some(ts("2024-02-01T00:00:00Z")),
            comments: vec![Activity::new("b", ts("2024-01-15T00:00:00Z"))],
        });
        log.issues.push(IssueRecord {
            number: 2,
            author_id: "a".into(),
            created_at: ts("2024-03-01T00:00:00Z"),
            closed_at: None,
            comments: vec![],
        });
        let cut = log.with_window_end(ts("2023-12-31T23:59:59Z"));
        assert_eq!(cut.issues.len(), 1);
        assert_eq!(cut.issues[0].closed_at, None);
        assert!(cut.issues[0].comments.is_empty());
        assert!(validate_log(&cut).is_empty());
    }

    #[test]
    fn bot_detection_is_case_insensitive() {
        assert!(is_bot("Dependabot[BOT]"));
        assert!(!is_bot("robot"));
    }
}
