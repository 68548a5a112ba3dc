//! Commit stream ingestion: real git repositories or a seeded synthetic
//! generator.
//!
//! Both backends emit the same [`CommitRecord`] shape, oldest-first, so the
//! rest of the pipeline never cares where a stream came from.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest;

#[derive(Debug, Error)]
pub enum CommitError {
    #[error("repository not readable at {path}: {detail}")]
    RepoUnreadable { path: PathBuf, detail: String },
    #[error("cannot resolve commit range: {0}")]
    RangeUnresolvable(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("git invocation failed: {0}")]
    Git(String),
}

/// One changed file within a commit, with line counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub lines_added: u64,
    pub lines_removed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitKind {
    Individual,
    Group,
    Merge,
}

/// One unit of the commit stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub parent_ids: Vec<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub author: String,
    pub message: String,
    pub changed_files: Vec<FileChange>,
    pub kind: CommitKind,
    pub branch: String,
}

impl CommitRecord {
    /// Commit size in changed lines (added + removed across all files).
    pub fn change_size(&self) -> u64 {
        self.changed_files
            .iter()
            .map(|f| f.lines_added + f.lines_removed)
            .sum()
    }

    pub fn is_merge(&self) -> bool {
        self.parent_ids.len() >= 2
    }
}

/// Which slice of history to walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryRange {
    /// Everything reachable from the branch tip.
    All,
    /// The `n` most recent commits.
    MostRecent(usize),
    /// `from..to` in git range notation (exclusive of `from`).
    Between { from: String, to: String },
}

// Field separator inside one commit header; record separator between commits.
const FIELD_SEP: char = '\x1f';
const RECORD_SEP: char = '\x1e';

/// Walk a git repository's history, oldest-first.
///
/// `branch` names the ref to walk (also recorded verbatim on every emitted
/// record); merge detection comes from the parent count. Plain history
/// carries no push metadata, so records are classified `individual` or
/// `merge` only, never `group`.
pub fn walk_history(
    repo_path: &Path,
    branch: &str,
    range: &HistoryRange,
) -> Result<Vec<CommitRecord>, CommitError> {
    if !repo_path.is_dir() {
        return Err(CommitError::RepoUnreadable {
            path: repo_path.to_path_buf(),
            detail: "not a directory".into(),
        });
    }
    let format = format!("{RECORD_SEP}%H{FIELD_SEP}%P{FIELD_SEP}%ct{FIELD_SEP}%an{FIELD_SEP}%B");
    let mut cmd = Command::new("git");
    cmd.arg("-C")
        .arg(repo_path)
        .arg("log")
        .arg("--reverse")
        .arg("--numstat")
        .arg(format!("--format={format}"));
    match range {
        HistoryRange::All => {
            cmd.arg(branch);
        }
        HistoryRange::MostRecent(n) => {
            if *n == 0 {
                return Err(CommitError::RangeUnresolvable("count must be >= 1".into()));
            }
            cmd.arg("-n").arg(n.to_string()).arg(branch);
        }
        HistoryRange::Between { from, to } => {
            cmd.arg(format!("{from}..{to}"));
        }
    }
    let out = cmd
        .output()
        .map_err(|e| CommitError::Git(format!("failed to spawn git: {e}")))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        return if stderr.contains("not a git repository") {
            Err(CommitError::RepoUnreadable {
                path: repo_path.to_path_buf(),
                detail: stderr.trim().to_string(),
            })
        } else {
            Err(CommitError::RangeUnresolvable(stderr.trim().to_string()))
        };
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut records = Vec::new();
    for chunk in text.split(RECORD_SEP).skip(1) {
        records.push(parse_log_chunk(chunk, branch)?);
    }
    if records.is_empty() {
        return Err(CommitError::RangeUnresolvable(
            "range resolved to zero commits".into(),
        ));
    }
    Ok(records)
}

fn parse_log_chunk(chunk: &str, branch: &str) -> Result<CommitRecord, CommitError> {
    let mut fields = chunk.splitn(5, FIELD_SEP);
    let id = fields.next().unwrap_or("").trim().to_string();
    let parents = fields.next().unwrap_or("").trim().to_string();
    let ts = fields.next().unwrap_or("").trim().to_string();
    let author = fields.next().unwrap_or("").trim().to_string();
    let rest = fields.next().unwrap_or("");
    if id.is_empty() {
        return Err(CommitError::Git("malformed log output".into()));
    }
    // The message runs until the numstat block, which is separated from it by
    // a blank line and consists of `added\tremoved\tpath` lines.
    let mut message_lines = Vec::new();
    let mut changed_files = Vec::new();
    for line in rest.lines() {
        let mut cols = line.splitn(3, '\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(r), Some(path))
                if !path.is_empty() && is_numstat_count(a) && is_numstat_count(r) =>
            {
                changed_files.push(FileChange {
                    path: path.to_string(),
                    lines_added: a.parse().unwrap_or(0),
                    lines_removed: r.parse().unwrap_or(0),
                });
            }
            _ => {
                if changed_files.is_empty() {
                    message_lines.push(line);
                }
            }
        }
    }
    while message_lines.last().is_some_and(|l| l.trim().is_empty()) {
        message_lines.pop();
    }
    let parent_ids: Vec<String> = parents.split_whitespace().map(str::to_string).collect();
    let kind = if parent_ids.len() >= 2 {
        CommitKind::Merge
    } else {
        CommitKind::Individual
    };
    Ok(CommitRecord {
        id,
        parent_ids,
        timestamp: ts
            .parse()
            .map_err(|e| CommitError::Git(format!("bad timestamp {ts:?}: {e}")))?,
        author,
        message: message_lines.join("\n"),
        changed_files,
        kind,
        branch: branch.to_string(),
    })
}

fn is_numstat_count(s: &str) -> bool {
    s == "-" || (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
}

/// Check out `commit_id` into `worktree`, creating the worktree on first use.
///
/// Different commits must never share a working directory concurrently; the
/// pipeline serializes checkouts per worktree.
pub fn checkout(repo_path: &Path, commit_id: &str, worktree: &Path) -> Result<(), CommitError> {
    if !worktree.join(".git").exists() {
        let out = Command::new("git")
            .arg("-C")
            .arg(repo_path)
            .arg("worktree")
            .arg("add")
            .arg("--detach")
            .arg(worktree)
            .arg(commit_id)
            .output()
            .map_err(|e| CommitError::Git(format!("failed to spawn git: {e}")))?;
        if !out.status.success() {
            return Err(CommitError::Git(format!(
                "worktree add failed: {}",
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        return Ok(());
    }
    let out = Command::new("git")
        .arg("-C")
        .arg(worktree)
        .arg("checkout")
        .arg("--force")
        .arg("--detach")
        .arg(commit_id)
        .output()
        .map_err(|e| CommitError::Git(format!("failed to spawn git: {e}")))?;
    if !out.status.success() {
        return Err(CommitError::Git(format!(
            "checkout of {commit_id} failed: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(())
}

/// Distribution of total changed lines per commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangeSizeDistribution {
    Uniform { min: u64, max: u64 },
    /// Geometric with the given mean; long-tailed like real commit sizes.
    Geometric { mean: f64 },
}

impl Default for ChangeSizeDistribution {
    fn default() -> Self {
        ChangeSizeDistribution::Geometric { mean: 20.0 }
    }
}

impl ChangeSizeDistribution {
    fn sample(&self, rng: &mut ChaCha12Rng) -> u64 {
        match self {
            ChangeSizeDistribution::Uniform { min, max } => rng.gen_range(*min..=*max),
            ChangeSizeDistribution::Geometric { mean } => {
                // Inverse-CDF sampling, support {1, 2, ...}.
                let p = 1.0 / mean.max(1.0);
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                (u.ln() / (1.0 - p).ln()).floor() as u64 + 1
            }
        }
    }
}

fn default_group_window() -> u64 {
    60
}
fn default_mean_gap() -> u64 {
    3600
}
fn default_burst_probability() -> f64 {
    0.2
}
fn default_start_timestamp() -> i64 {
    1_600_000_000
}
fn default_max_files_per_commit() -> usize {
    4
}

/// Configuration for the synthetic commit generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_commits: usize,
    pub file_universe: Vec<String>,
    #[serde(default)]
    pub change_size: ChangeSizeDistribution,
    pub merge_probability: f64,
    /// Probability that a commit lands within `group_window_secs` of its
    /// predecessor (a batch push).
    #[serde(default = "default_burst_probability")]
    pub burst_probability: f64,
    #[serde(default = "default_group_window")]
    pub group_window_secs: u64,
    #[serde(default = "default_mean_gap")]
    pub mean_gap_secs: u64,
    #[serde(default = "default_start_timestamp")]
    pub start_timestamp: i64,
    #[serde(default = "default_max_files_per_commit")]
    pub max_files_per_commit: usize,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), CommitError> {
        if self.n_commits < 1 {
            return Err(CommitError::InvalidSpec("n_commits must be >= 1".into()));
        }
        if self.file_universe.is_empty() {
            return Err(CommitError::InvalidSpec("file_universe is empty".into()));
        }
        for (name, p) in [
            ("merge_probability", self.merge_probability),
            ("burst_probability", self.burst_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CommitError::InvalidSpec(format!("{name} not in [0,1]")));
            }
        }
        if let ChangeSizeDistribution::Uniform { min, max } = &self.change_size {
            if min > max {
                return Err(CommitError::InvalidSpec("change_size min > max".into()));
            }
        }
        Ok(())
    }
}

/// Generate a deterministic synthetic commit stream.
///
/// Identical `(spec, seed)` pairs yield byte-identical streams. Commits that
/// land within `group_window_secs` of an adjacent non-merge commit are
/// classified as part of a group push.
pub fn synth_stream(spec: &SynthSpec, seed: u64) -> Result<Vec<CommitRecord>, CommitError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records: Vec<CommitRecord> = Vec::with_capacity(spec.n_commits);
    let mut ts = spec.start_timestamp;
    for i in 0..spec.n_commits {
        let id = synth_id(seed, i);
        if i > 0 {
            let gap = if rng.gen_bool(spec.burst_probability) {
                rng.gen_range(1..=spec.group_window_secs.max(1))
            } else {
                rng.gen_range(spec.group_window_secs + 1..=spec.group_window_secs + 1 + 2 * spec.mean_gap_secs)
            };
            ts += gap as i64;
        }
        let is_merge = i > 0 && rng.gen_bool(spec.merge_probability);
        let parent_ids = if i == 0 {
            Vec::new()
        } else if is_merge {
            let tip = records[i - 1].id.clone();
            // Second parent is any earlier commit; with a single ancestor the
            // tip has to stand in for both sides.
            let second = if i >= 2 {
                records[rng.gen_range(0..i - 1)].id.clone()
            } else {
                tip.clone()
            };
            vec![tip, second]
        } else {
            vec![records[i - 1].id.clone()]
        };
        let n_files = rng.gen_range(1..=spec.max_files_per_commit.min(spec.file_universe.len()));
        let mut picked = BTreeSet::new();
        while picked.len() < n_files {
            picked.insert(rng.gen_range(0..spec.file_universe.len()));
        }
        let total = spec.change_size.sample(&mut rng).max(1);
        let changed_files = picked
            .iter()
            .map(|&fi| {
                let share = (total / n_files as u64).max(1);
                let added = rng.gen_range(0..=share);
                FileChange {
                    path: spec.file_universe[fi].clone(),
                    lines_added: added,
                    lines_removed: share - added,
                }
            })
            .collect();
        records.push(CommitRecord {
            id,
            parent_ids,
            timestamp: ts,
            author: format!("dev{}", rng.gen_range(0..5)),
            message: synth_message(&mut rng),
            changed_files,
            kind: if is_merge {
                CommitKind::Merge
            } else {
                CommitKind::Individual
            },
            branch: "main".to_string(),
        });
    }
    classify_groups(&mut records, spec.group_window_secs);
    Ok(records)
}

fn synth_id(seed: u64, index: usize) -> String {
    let d = Digest::of_parts(&[&seed.to_le_bytes(), &(index as u64).to_le_bytes()]);
    d.to_hex()[..40].to_string()
}

const MESSAGE_WORDS: &[&str] = &[
    "fix", "refactor", "cleanup", "add", "remove", "update", "tweak", "docs", "tests", "build",
];

fn synth_message(rng: &mut ChaCha12Rng) -> String {
    let a = MESSAGE_WORDS[rng.gen_range(0..MESSAGE_WORDS.len())];
    let b = MESSAGE_WORDS[rng.gen_range(0..MESSAGE_WORDS.len())];
    format!("{a} {b} #{}", rng.gen_range(100..1000))
}

/// Mark runs of >= 2 timestamp-adjacent non-merge commits as group pushes.
fn classify_groups(records: &mut [CommitRecord], window_secs: u64) {
    let mut run_start = 0;
    let mut i = 0;
    while i <= records.len() {
        let run_breaks = i == records.len()
            || records[i].kind == CommitKind::Merge
            || (i > run_start
                && records[i].timestamp - records[i - 1].timestamp > window_secs as i64);
        if run_breaks {
            if i - run_start >= 2 {
                for r in &mut records[run_start..i] {
                    r.kind = CommitKind::Group;
                }
            }
            run_start = if i < records.len() && records[i].kind == CommitKind::Merge {
                i + 1
            } else {
                i
            };
        }
        i += 1;
    }
}
