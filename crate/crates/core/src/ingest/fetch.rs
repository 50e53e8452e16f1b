//! Pulls a project's events from a hosting-platform style JSON API and
//! stores them as a canonical archive.
//!
//! Endpoints, relative to `base_url`:
//!
//! | path                                | body                                  |
//! |-------------------------------------|---------------------------------------|
//! | `/repos/{repo}`                     | meta object (counts, optional window) |
//! | `/repos/{repo}/commits?page=N`      | array of commit records               |
//! | `/repos/{repo}/pulls?page=N`        | array of pull request records         |
//! | `/repos/{repo}/issues?page=N`       | array of issue records                |
//! | `/repos/{repo}/releases?page=N`     | array of RFC 3339 timestamps          |
//! | `/repos/{repo}/dependencies?page=N` | array of identifiers                  |
//!
//! Pages start at 1; an empty array ends the listing.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::thread;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;

use super::archive::{self, jsonl_line, Meta};
use super::{
    load_archive, rfc3339, truncate_issue, truncate_pull_request, CommitRecord, IssueRecord,
    ProjectEventLog, PullRequestRecord,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Retries after the first attempt on 429 and 5xx responses.
    pub max_retries: u32,
    /// First backoff delay; doubled on every retry.
    pub initial_backoff: Duration,
    pub per_page: usize,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            max_retries: 5,
            initial_backoff: Duration::from_millis(500),
            per_page: 100,
            timeout: Duration::from_secs(30),
        }
    }
}

struct Client<'a> {
    agent: ureq::Agent,
    token: &'a str,
    opts: &'a FetchOptions,
}

enum Failure {
    Fatal(Error),
    Exhausted(String),
}

impl Client<'_> {
    fn get_text(&self, url: &str) -> std::result::Result<String, Failure> {
        let mut delay = self.opts.initial_backoff;
        let mut last_reason = String::new();
        for attempt in 0..=self.opts.max_retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            let resp = self
                .agent
                .get(url)
                .header("Authorization", &format!("Bearer {}", self.token))
                .header("Accept", "application/json")
                .call();
            let mut resp = match resp {
                Ok(r) => r,
                Err(e) => {
                    last_reason = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            match status {
                200..=299 => {
                    return resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| Failure::Exhausted(e.to_string()));
                }
                401 | 403 => {
                    return Err(Failure::Fatal(Error::Auth {
                        url: url.to_owned(),
                        status,
                    }))
                }
                429 => {
                    let retry_after = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok());
                    if attempt == self.opts.max_retries {
                        return Err(Failure::Fatal(Error::RateLimited {
                            url: url.to_owned(),
                            retry_after_secs: retry_after,
                        }));
                    }
                    if let Some(secs) = retry_after {
                        delay = delay.max(Duration::from_secs(secs));
                    }
                    last_reason = "HTTP 429".into();
                }
                500..=599 => last_reason = format!("HTTP {status}"),
                _ => return Err(Failure::Exhausted(format!("HTTP {status}"))),
            }
        }
        Err(Failure::Exhausted(last_reason))
    }

    fn get_json<T: DeserializeOwned>(&self, url: &str) -> std::result::Result<T, Failure> {
        let text = self.get_text(url)?;
        serde_json::from_str(&text).map_err(|e| Failure::Exhausted(format!("bad JSON: {e}")))
    }

    /// Streams every page of `endpoint` through `sink`.
    fn paginate<T: DeserializeOwned>(
        &self,
        endpoint: &str,
        mut sink: impl FnMut(T) -> Result<()>,
    ) -> std::result::Result<(), Failure> {
        for page in 1.. {
            let sep = if endpoint.contains('?') { '&' } else { '?' };
            let url = format!("{endpoint}{sep}page={page}&per_page={}", self.opts.per_page);
            let rows: Vec<T> = self.get_json(&url).map_err(|f| match f {
                Failure::Exhausted(reason) => Failure::Fatal(Error::PartialData { url, reason }),
                fatal => fatal,
            })?;
            if rows.is_empty() {
                break;
            }
            for row in rows {
                sink(row).map_err(Failure::Fatal)?;
            }
        }
        Ok(())
    }
}

#[derive(serde::Deserialize)]
#[serde(transparent)]
struct Timestamp(#[serde(with = "rfc3339")] DateTime<Utc>);

fn append(file: &mut fs::File, path: &Path, line: &str) -> Result<()> {
    file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> std::result::Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::Fatal(Error::io(path, e)))
}

/// Downloads `repo_id` into an archive at `out`, then loads it through
/// [`load_archive`]. Events after `window_end` are dropped. On any failure the
/// partially written archive directory is removed.
pub fn fetch_project(
    base_url: &str,
    repo_id: &str,
    auth_token: &str,
    window_end: DateTime<Utc>,
    out: &Path,
    opts: &FetchOptions,
) -> Result<ProjectEventLog> {
    let created = !out.exists();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match download(base_url, repo_id, auth_token, window_end, out, opts) {
        Ok(()) => load_archive(out),
        Err(e) => {
            if created {
                let _ = fs::remove_dir_all(out);
            } else {
                for f in [
                    archive::META,
                    archive::COMMITS,
                    archive::PULL_REQUESTS,
                    archive::ISSUES,
                    archive::RELEASES,
                    archive::DEPENDENCIES,
                ] {
                    let _ = fs::remove_file(out.join(f));
                }
            }
            Err(e)
        }
    }
}

fn download(
    base_url: &str,
    repo_id: &str,
    token: &str,
    window_end: DateTime<Utc>,
    out: &Path,
    opts: &FetchOptions,
) -> Result<()> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    let client = Client {
        agent,
        token,
        opts,
    };
    let root = format!("{}/repos/{}", base_url.trim_end_matches('/'), repo_id);
    let unwrap = |r: std::result::Result<(), Failure>, url: &str| match r {
        Ok(()) => Ok(()),
        Err(Failure::Fatal(e)) => Err(e),
        Err(Failure::Exhausted(reason)) => Err(Error::PartialData {
            url: url.to_owned(),
            reason,
        }),
    };

    let mut meta: Meta = match client.get_json(&root) {
        Ok(m) => m,
        Err(Failure::Fatal(e)) => return Err(e),
        Err(Failure::Exhausted(reason)) => return Err(Error::PartialData { url: root, reason }),
    };
    meta.repo_id = repo_id.to_owned();
    meta.window_end = Some(window_end);

    let path = out.join(archive::COMMITS);
    let url = format!("{root}/commits");
    let r = create(&path).and_then(|mut f| {
        client.paginate(&url, |c: CommitRecord| {
            if c.authored_at <= window_end {
                append(&mut f, &path, &jsonl_line(&c)?)?;
            }
            Ok(())
        })
    });
    unwrap(r, &url)?;

    let path = out.join(archive::PULL_REQUESTS);
    let url = format!("{root}/pulls");
    let r = create(&path).and_then(|mut f| {
        client.paginate(&url, |p: PullRequestRecord| {
            if let Some(p) = truncate_pull_request(p, window_end) {
                append(&mut f, &path, &jsonl_line(&p)?)?;
            }
            Ok(())
        })
    });
    unwrap(r, &url)?;

    let path = out.join(archive::ISSUES);
    let url = format!("{root}/issues");
    let r = create(&path).and_then(|mut f| {
        client.paginate(&url, |i: IssueRecord| {
            if let Some(i) = truncate_issue(i, window_end) {
                append(&mut f, &path, &jsonl_line(&i)?)?;
            }
            Ok(())
        })
    });
    unwrap(r, &url)?;

    let path = out.join(archive::RELEASES);
    let url = format!("{root}/releases");
    let r = create(&path).and_then(|mut f| {
        client.paginate(&url, |t: Timestamp| {
            if t.0 <= window_end {
                append(&mut f, &path, &format!("\"{}\"\n", rfc3339::format(&t.0)))?;
            }
            Ok(())
        })
    });
    unwrap(r, &url)?;

    let path = out.join(archive::DEPENDENCIES);
    let url = format!("{root}/dependencies");
    let r = create(&path).and_then(|mut f| {
        client.paginate(&url, |d: String| append(&mut f, &path, &format!("{}\n", d.trim())))
    });
    unwrap(r, &url)?;

    archive::write_meta(out, &meta)
}
