//! Canonical archive layout:
//!
//! ```text
//! <dir>/meta.json           repo_id, window_start, window_end, stars_count, fork_count, watchers_count
//! <dir>/commits.jsonl       one CommitRecord per line
//! <dir>/pull_requests.jsonl one PullRequestRecord per line
//! <dir>/issues.jsonl        one IssueRecord per line
//! <dir>/releases.jsonl      one RFC 3339 timestamp (JSON string) per line
//! <dir>/dependencies.txt    one identifier per line
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{rfc3339, validate_log, ProjectEventLog};
use crate::error::{Error, Result};

pub(crate) const META: &str = "meta.json";
pub(crate) const COMMITS: &str = "commits.jsonl";
pub(crate) const PULL_REQUESTS: &str = "pull_requests.jsonl";
pub(crate) const ISSUES: &str = "issues.jsonl";
pub(crate) const RELEASES: &str = "releases.jsonl";
pub(crate) const DEPENDENCIES: &str = "dependencies.txt";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Meta {
    #[serde(default)]
    pub repo_id: String,
    #[serde(with = "rfc3339::option", default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<DateTime<Utc>>,
    #[serde(with = "rfc3339::option", default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<DateTime<Utc>>,
    #[serde(default)]
    pub stars_count: u64,
    #[serde(default)]
    pub fork_count: u64,
    #[serde(default)]
    pub watchers_count: u64,
}

fn required(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingFile(p))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| Error::Schema {
            file: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(transparent)]
struct Timestamp(#[serde(with = "rfc3339")] DateTime<Utc>);

/// Reads and validates the archive at `dir`.
///
/// A missing `window_end` in `meta.json` defaults to the latest event timestamp;
/// a missing `window_start` to the earliest.
pub fn load_archive(dir: impl AsRef<Path>) -> Result<ProjectEventLog> {
    let dir = dir.as_ref();
    let meta_path = required(dir, META)?;
    let meta: Meta = serde_json::from_str(&read_text(&meta_path)?).map_err(|e| Error::Schema {
        file: meta_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;

    let commits = read_jsonl(&required(dir, COMMITS)?)?;
    let pull_requests = read_jsonl(&required(dir, PULL_REQUESTS)?)?;
    let issues = read_jsonl(&required(dir, ISSUES)?)?;
    let releases = read_jsonl::<Timestamp>(&required(dir, RELEASES)?)?
        .into_iter()
        .map(|t| t.0)
        .collect();
    let dependencies = read_text(&required(dir, DEPENDENCIES)?)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect();

    let mut log = ProjectEventLog {
        repo_id: meta.repo_id,
        window_start: DateTime::<Utc>::UNIX_EPOCH,
        window_end: DateTime::<Utc>::UNIX_EPOCH,
        commits,
        pull_requests,
        issues,
        releases,
        stars_count: meta.stars_count,
        fork_count: meta.fork_count,
        watchers_count: meta.watchers_count,
        dependencies,
    };
    let (first, last) = log
        .event_timestamps()
        .fold((None, None), |(lo, hi): (Option<DateTime<Utc>>, Option<DateTime<Utc>>), t| {
            (
                Some(lo.map_or(t, |v| v.min(t))),
                Some(hi.map_or(t, |v| v.max(t))),
            )
        });
    log.window_end = meta
        .window_end
        .or(last)
        .or(meta.window_start)
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    log.window_start = meta.window_start.or(first).unwrap_or(log.window_end);

    let violations = validate_log(&log);
    if !violations.is_empty() {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::InvariantViolation(format!("{}: {msg}", log.repo_id)));
    }
    Ok(log)
}

pub(crate) fn write_meta(dir: &Path, meta: &Meta) -> Result<()> {
    let path = dir.join(META);
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn jsonl_line<T: Serialize>(row: &T) -> Result<String> {
    let mut s = serde_json::to_string(row)?;
    s.push('\n');
    Ok(s)
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for l in lines {
        f.write_all(l.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes `log` in the canonical layout, creating `dir` if needed.
pub fn write_archive(log: &ProjectEventLog, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_meta(
        dir,
        &Meta {
            repo_id: log.repo_id.clone(),
            window_start: Some(log.window_start),
            window_end: Some(log.window_end),
            stars_count: log.stars_count,
            fork_count: log.fork_count,
            watchers_count: log.watchers_count,
        },
    )?;
    write_lines(
        &dir.join(COMMITS),
        log.commits.iter().map(jsonl_line).collect::<Result<Vec<_>>>()?,
    )?;
    write_lines(
        &dir.join(PULL_REQUESTS),
        log.pull_requests
            .iter()
            .map(jsonl_line)
            .collect::<Result<Vec<_>>>()?,
    )?;
    write_lines(
        &dir.join(ISSUES),
        log.issues.iter().map(jsonl_line).collect::<Result<Vec<_>>>()?,
    )?;
    write_lines(
        &dir.join(RELEASES),
        log.releases
            .iter()
            .map(|t| format!("\"{}\"\n", rfc3339::format(t))),
    )?;
    write_lines(
        &dir.join(DEPENDENCIES),
        log.dependencies.iter().map(|d| format!("{d}\n")),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn empty_archive(dir: &Path) {
        write(
            dir,
            META,
            r#"{"repo_id":"org/empty","window_start":"2023-01-01T00:00:00Z","window_end":"2023-12-31T23:59:59Z"}"#,
        );
        for f in [COMMITS, PULL_REQUESTS, ISSUES, RELEASES, DEPENDENCIES] {
            write(dir, f, "");
        }
    }

    #[test]
    fn empty_archive_loads() {
        let tmp = tempfile::tempdir().unwrap();
        empty_archive(tmp.path());
        let log = load_archive(tmp.path()).unwrap();
        assert!(log.commits.is_empty() && log.pull_requests.is_empty() && log.issues.is_empty());
        assert_eq!((log.stars_count, log.fork_count, log.watchers_count), (0, 0, 0));
    }

    #[test]
    fn missing_file_reported() {
        let tmp = tempfile::tempdir().unwrap();
        empty_archive(tmp.path());
        fs::remove_file(tmp.path().join(ISSUES)).unwrap();
        assert!(matches!(load_archive(tmp.path()), Err(Error::MissingFile(p)) if p.ends_with(ISSUES)));
    }

    #[test]
    fn schema_error_carries_line() {
        let tmp = tempfile::tempdir().unwrap();
        empty_archive(tmp.path());
        write(
            tmp.path(),
            COMMITS,
            "{\"sha\":\"a\",\"author_id\":\"x\",\"authored_at\":\"2023-02-01T00:00:00Z\",\"files_changed\":1}\n{\"sha\":\"b\"}\n",
        );
        match load_archive(tmp.path()) {
            Err(Error::Schema { line, file, .. }) => {
                assert_eq!(line, 2);
                assert!(file.ends_with(COMMITS));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_end_defaults_to_latest_event() {
        let tmp = tempfile::tempdir().unwrap();
        empty_archive(tmp.path());
        write(tmp.path(), META, r#"{"repo_id":"org/x"}"#);
        write(
            tmp.path(),
            RELEASES,
            "\"2023-03-01T00:00:00Z\"\n\"2023-05-01T12:00:00Z\"\n",
        );
        let log = load_archive(tmp.path()).unwrap();
        assert_eq!(rfc3339::format(&log.window_end), "2023-05-01T12:00:00Z");
        assert_eq!(rfc3339::format(&log.window_start), "2023-03-01T00:00:00Z");
    }

    #[test]
    fn closed_before_created_is_invariant_violation() {
        let tmp = tempfile::tempdir().unwrap();
        empty_archive(tmp.path());
        write(
            tmp.path(),
            ISSUES,
            "{\"number\":9,\"author_id\":\"x\",\"created_at\":\"2023-05-01T00:00:00Z\",\"closed_at\":\"2023-04-01T00:00:00Z\"}\n",
        );
        match load_archive(tmp.path()) {
            Err(Error::InvariantViolation(msg)) => assert!(msg.contains("issue #9"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
