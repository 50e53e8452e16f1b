use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};

use super::{Activity, ProjectEventLog};

/// One broken invariant, keyed by entity kind and identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: &'static str,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.entity, self.key, self.message)
    }
}

struct Checker<'a> {
    log: &'a ProjectEventLog,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, entity: &'static str, key: impl ToString, message: impl Into<String>) {
        self.out.push(Violation {
            entity,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn in_window(&self, t: DateTime<Utc>) -> bool {
        t >= self.log.window_start && t <= self.log.window_end
    }

    fn check_time(&mut self, entity: &'static str, key: &str, what: &str, t: DateTime<Utc>) {
        if !self.in_window(t) {
            self.push(entity, key, format!("{what} lies outside the observation window"));
        }
    }

    fn check_activities(&mut self, entity: &'static str, key: &str, what: &str, acts: &[Activity]) {
        for a in acts {
            if a.author_id.is_empty() {
                self.push(entity, key, format!("{what} has empty author_id"));
            }
            self.check_time(entity, key, &format!("{what} timestamp"), a.timestamp);
        }
    }
}

/// Lists every invariant violation in `log`; an empty list means the log is valid.
pub fn validate_log(log: &ProjectEventLog) -> Vec<Violation> {
    let mut c = Checker {
        log,
        out: Vec::new(),
    };

    if log.repo_id.trim().is_empty() {
        c.push("meta", "repo_id", "repo_id is empty");
    }
    if log.window_start > log.window_end {
        c.push("meta", &log.repo_id, "window_start is after window_end");
    }

    let mut shas = HashSet::new();
    for commit in &log.commits {
        let key = commit.sha.as_str();
        if commit.sha.is_empty() {
            c.push("commit", key, "sha is empty");
        }
        if !shas.insert(commit.sha.as_str()) {
            c.push("commit", key, "commit sha duplicated");
        }
        if commit.author_id.is_empty() {
            c.push("commit", key, "author_id is empty");
        }
        c.check_time("commit", key, "authored_at", commit.authored_at);
    }

    let mut pr_numbers = HashSet::new();
    for pr in &log.pull_requests {
        let key = format!("#{}", pr.number);
        if pr.number == 0 {
            c.push("pull request", &key, "number must be positive");
        }
        if !pr_numbers.insert(pr.number) {
            c.push("pull request", &key, "number duplicated");
        }
        if pr.author_id.is_empty() {
            c.push("pull request", &key, "author_id is empty");
        }
        c.check_time("pull request", &key, "created_at", pr.created_at);
        if let Some(closed) = pr.closed_at {
            if closed < pr.created_at {
                c.push("pull request", &key, "closed_at precedes created_at");
            }
            c.check_time("pull request", &key, "closed_at", closed);
        } else if pr.merged {
            c.push("pull request", &key, "merged without closed_at");
        }
        c.check_activities("pull request", &key, "comment", &pr.comments);
        c.check_activities("pull request", &key, "review", &pr.reviews);
        c.check_activities("pull request", &key, "review comment", &pr.review_comments);
    }

    let mut issue_numbers = HashSet::new();
    for issue in &log.issues {
        let key = format!("#{}", issue.number);
        if issue.number == 0 {
            c.push("issue", &key, "number must be positive");
        }
        if !issue_numbers.insert(issue.number) {
            c.push("issue", &key, "number duplicated");
        }
        if issue.author_id.is_empty() {
            c.push("issue", &key, "author_id is empty");
        }
        c.check_time("issue", &key, "created_at", issue.created_at);
        if let Some(closed) = issue.closed_at {
            if closed < issue.created_at {
                c.push("issue", &key, "closed_at precedes created_at");
            }
            c.check_time("issue", &key, "closed_at", closed);
        }
        if issue.comments.iter().any(|a| a.timestamp < issue.created_at) {
            c.push("issue", &key, "comment precedes issue creation");
        }
        c.check_activities("issue", &key, "comment", &issue.comments);
    }

    for (i, r) in log.releases.iter().enumerate() {
        c.check_time("release", &format!("#{i}"), "timestamp", *r);
    }

    let mut deps = HashSet::new();
    for d in &log.dependencies {
        let norm = d.trim().to_lowercase();
        if norm.is_empty() {
            c.push("dependency", d, "identifier is empty");
        } else if !deps.insert(norm) {
            c.push("dependency", d, "identifier duplicated (case-insensitive)");
        }
    }

    c.out
}
