//! Commit backlog management: queue policies, priority-driven durations,
//! core-budget packing, and recurring snapshot jobs.

use std::collections::{BTreeMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commit::{CommitKind, CommitRecord};
use crate::digest::Digest;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("out-of-order enqueue: commit {id} is older than the queue tail")]
    OutOfOrder { id: String },
    #[error("job needs {needed} cores but the total budget is {budget}")]
    BudgetExceeded { needed: u32, budget: u32 },
    #[error("invalid duration ladder: {0}")]
    BadLadder(String),
    #[error("invalid calendar spec {0:?} (expected daily@HH:MM or every:<seconds>)")]
    BadCalendar(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    fn bump(self) -> Priority {
        match self {
            Priority::Low => Priority::Medium,
            Priority::Medium | Priority::High => Priority::High,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Priority::Low => "low",
            Priority::Medium => "medium",
            Priority::High => "high",
        }
    }
}

/// The teatime / lunchtime / bedtime duration ladder, in seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationLadder {
    pub low: u64,
    pub medium: u64,
    pub high: u64,
}

impl Default for DurationLadder {
    fn default() -> Self {
        // 15 min / 1 h / 8 h.
        DurationLadder {
            low: 900,
            medium: 3600,
            high: 28800,
        }
    }
}

impl DurationLadder {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        if self.low < self.medium && self.medium < self.high {
            Ok(())
        } else {
            Err(SchedulerError::BadLadder(format!(
                "durations must be strictly increasing, got {} / {} / {}",
                self.low, self.medium, self.high
            )))
        }
    }

    pub fn duration_for(&self, p: Priority) -> u64 {
        match p {
            Priority::Low => self.low,
            Priority::Medium => self.medium,
            Priority::High => self.high,
        }
    }
}

fn default_code_extensions() -> Vec<String> {
    ["c", "h", "cc", "cpp", "cxx", "hpp", "rs", "go", "py", "java", "js", "ts"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_keywords() -> Vec<String> {
    ["security", "vuln", "overflow", "parser", "crash", "fuzz"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_size_threshold() -> u64 {
    500
}

/// Rules feeding [`assign_priority`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityRules {
    #[serde(default = "default_code_extensions")]
    pub code_extensions: Vec<String>,
    #[serde(default = "default_keywords")]
    pub keywords: Vec<String>,
    #[serde(default = "default_size_threshold")]
    pub size_threshold: u64,
}

impl Default for PriorityRules {
    fn default() -> Self {
        PriorityRules {
            code_extensions: default_code_extensions(),
            keywords: default_keywords(),
            size_threshold: default_size_threshold(),
        }
    }
}

fn extension_of(path: &str) -> Option<String> {
    let name = path.rsplit('/').next()?;
    let (_, ext) = name.rsplit_once('.')?;
    Some(ext.to_ascii_lowercase())
}

/// Deterministic priority from commit type, file types, message keywords,
/// and size.
///
/// Base level: individual -> low, group -> medium, merge -> high. A commit
/// touching only non-code files is capped at low; any code file bumps one
/// level. A message keyword bumps one level, as does a change of
/// `size_threshold` lines or more. Saturates at high.
pub fn assign_priority(commit: &CommitRecord, rules: &PriorityRules) -> Priority {
    let mut level = match commit.kind {
        CommitKind::Individual => Priority::Low,
        CommitKind::Group => Priority::Medium,
        CommitKind::Merge => Priority::High,
    };
    if !commit.changed_files.is_empty() {
        let any_code = commit.changed_files.iter().any(|f| {
            extension_of(&f.path)
                .map(|e| rules.code_extensions.contains(&e))
                .unwrap_or(false)
        });
        if any_code {
            level = level.bump();
        } else {
            level = Priority::Low;
        }
    }
    let message = commit.message.to_ascii_lowercase();
    if rules
        .keywords
        .iter()
        .any(|k| message.contains(&k.to_ascii_lowercase()))
    {
        level = level.bump();
    }
    if commit.change_size() >= rules.size_threshold {
        level = level.bump();
    }
    level
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueMode {
    /// Process every commit, FIFO.
    ProcessAll,
    /// When a run finishes, jump to the newest queued commit; everything in
    /// between is still fingerprinted, never campaigned.
    LatestOnly,
    /// Cancel the running campaign when a new commit arrives (partial
    /// findings are merged first).
    Interrupt,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QueuePolicy {
    pub mode: QueueMode,
    /// Target selection on/off. Even under latest_only every commit is
    /// fingerprinted so no change can escape unexamined.
    pub selective: bool,
}

/// FIFO commit backlog. Never drops records.
#[derive(Debug, Default)]
pub struct CommitQueue {
    items: VecDeque<CommitRecord>,
    last_ts: Option<i64>,
}

/// What to do next: fingerprint all of `fingerprint_commits` (cache
/// records), campaign only `campaign_commit`.
#[derive(Debug, Clone)]
pub struct JobPlan {
    pub fingerprint_commits: Vec<CommitRecord>,
    pub campaign_commit: CommitRecord,
}

impl CommitQueue {
    pub fn new() -> Self {
        CommitQueue::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Enqueue a commit; it must not be older than the queue tail.
    pub fn enqueue(&mut self, commit: CommitRecord) -> Result<(), SchedulerError> {
        if let Some(last) = self.last_ts {
            if commit.timestamp < last {
                return Err(SchedulerError::OutOfOrder { id: commit.id });
            }
        }
        self.last_ts = Some(commit.timestamp);
        self.items.push_back(commit);
        Ok(())
    }

    /// Under `latest_only` the whole backlog coalesces into one job for the
    /// newest commit; otherwise jobs come off the front one at a time.
    pub fn next_job(&mut self, mode: QueueMode) -> Option<JobPlan> {
        if self.items.is_empty() {
            return None;
        }
        match mode {
            QueueMode::ProcessAll | QueueMode::Interrupt => {
                let c = self.items.pop_front().unwrap();
                Some(JobPlan {
                    fingerprint_commits: vec![c.clone()],
                    campaign_commit: c,
                })
            }
            QueueMode::LatestOnly => {
                let all: Vec<CommitRecord> = self.items.drain(..).collect();
                let newest = all.last().unwrap().clone();
                Some(JobPlan {
                    fingerprint_commits: all,
                    campaign_commit: newest,
                })
            }
        }
    }
}

/// Fingerprints of the most recently *fuzzed* state per target.
///
/// Selection compares against this, not against the previous commit, so
/// coalescing can never lose a change: a target is skipped only if its
/// fingerprint equals what was last actually fuzzed.
#[derive(Debug, Clone, Default)]
pub struct BaselineStore {
    per_target: BTreeMap<String, Digest>,
}

impl BaselineStore {
    pub fn new() -> Self {
        BaselineStore::default()
    }

    pub fn get(&self, target: &str) -> Option<&Digest> {
        self.per_target.get(target)
    }

    pub fn matches(&self, target: &str, digest: &Digest) -> bool {
        self.get(target) == Some(digest)
    }

    /// Advance after a campaign for `target` completed (or was interrupted
    /// with its partial findings merged).
    pub fn advance(&mut self, target: &str, digest: Digest) {
        self.per_target.insert(target.to_string(), digest);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Digest)> {
        self.per_target.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// One campaign placed on the core timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledCampaign {
    pub spec_index: usize,
    pub start_offset: f64,
}

#[derive(Debug, Clone)]
pub struct CoreSchedule {
    pub entries: Vec<ScheduledCampaign>,
    pub peak_demand: u32,
    pub makespan: f64,
}

/// Pack target-campaigns onto the core budget, first-fit in FIFO order.
///
/// Each campaign needs one ensemble worth of cores for its duration; the
/// budget is never oversubscribed at any instant.
pub fn allocate_cores(
    durations: &[f64],
    ensemble_size: u32,
    budget: u32,
) -> Result<CoreSchedule, SchedulerError> {
    if ensemble_size > budget {
        return Err(SchedulerError::BudgetExceeded {
            needed: ensemble_size,
            budget,
        });
    }
    let concurrent_max = (budget / ensemble_size.max(1)) as usize;
    let mut placed: Vec<(f64, f64)> = Vec::new(); // (start, end)
    let mut entries = Vec::with_capacity(durations.len());
    // Instantaneous usage within [t, t+d) can only change at placed starts.
    let fits = |t: f64, d: f64, placed: &[(f64, f64)]| {
        let points = std::iter::once(t)
            .chain(placed.iter().map(|&(s, _)| s).filter(|&s| s > t && s < t + d));
        let mut points: Vec<f64> = points.collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.into_iter().all(|p| {
            placed.iter().filter(|&&(s, e)| s <= p && p < e).count() < concurrent_max
        })
    };
    for (i, &d) in durations.iter().enumerate() {
        let mut candidates: Vec<f64> = std::iter::once(0.0)
            .chain(placed.iter().map(|&(_, e)| e))
            .collect();
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let start = candidates
            .into_iter()
            .find(|&t| fits(t, d, &placed))
            .expect("t = max end is always feasible");
        placed.push((start, start + d));
        entries.push(ScheduledCampaign {
            spec_index: i,
            start_offset: start,
        });
    }
    let mut peak = 0usize;
    for &(s, _) in &placed {
        let overlapping = placed.iter().filter(|&&(s2, e2)| s2 <= s && s < e2).count();
        peak = peak.max(overlapping);
    }
    Ok(CoreSchedule {
        makespan: placed.iter().map(|&(_, e)| e).fold(0.0, f64::max),
        peak_demand: peak as u32 * ensemble_size,
        entries,
    })
}

/// When recurring full-target snapshot jobs run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnapshotCalendar {
    /// Every day at HH:MM (UTC).
    Daily { hour: u32, minute: u32 },
    /// Every N seconds, aligned to the epoch.
    Every { seconds: u64 },
}

impl SnapshotCalendar {
    pub fn parse(s: &str) -> Result<Self, SchedulerError> {
        let bad = || SchedulerError::BadCalendar(s.to_string());
        if let Some(rest) = s.strip_prefix("daily@") {
            let (h, m) = rest.split_once(':').ok_or_else(bad)?;
            let hour: u32 = h.parse().map_err(|_| bad())?;
            let minute: u32 = m.parse().map_err(|_| bad())?;
            if hour >= 24 || minute >= 60 {
                return Err(bad());
            }
            return Ok(SnapshotCalendar::Daily { hour, minute });
        }
        if let Some(rest) = s.strip_prefix("every:") {
            let seconds: u64 = rest.parse().map_err(|_| bad())?;
            if seconds == 0 {
                return Err(bad());
            }
            return Ok(SnapshotCalendar::Every { seconds });
        }
        Err(bad())
    }

    /// The first occurrence at or after `at`.
    pub fn next_occurrence(&self, at: i64) -> i64 {
        match *self {
            SnapshotCalendar::Daily { hour, minute } => {
                let offset = (hour * 3600 + minute * 60) as i64;
                let candidate = at.div_euclid(86400) * 86400 + offset;
                if candidate >= at {
                    candidate
                } else {
                    candidate + 86400
                }
            }
            SnapshotCalendar::Every { seconds } => {
                let step = seconds as i64;
                let candidate = at.div_euclid(step) * step;
                if candidate >= at {
                    candidate
                } else {
                    candidate + step
                }
            }
        }
    }

    /// Occurrence timestamps in the half-open window `[from, to)`.
    pub fn occurrences(&self, from: i64, to: i64) -> Vec<i64> {
        let mut out = Vec::new();
        match *self {
            SnapshotCalendar::Daily { hour, minute } => {
                let offset = (hour * 3600 + minute * 60) as i64;
                let mut day = from.div_euclid(86400);
                loop {
                    let t = day * 86400 + offset;
                    if t >= to {
                        break;
                    }
                    if t >= from {
                        out.push(t);
                    }
                    day += 1;
                }
            }
            SnapshotCalendar::Every { seconds } => {
                let step = seconds as i64;
                let mut t = from.div_euclid(step) * step;
                if t < from {
                    t += step;
                }
                while t < to {
                    out.push(t);
                    t += step;
                }
            }
        }
        out
    }
}

/// A recurring job that fuzzes all targets, bypassing selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotPlan {
    pub calendar: SnapshotCalendar,
    pub duration_s: u64,
}

/// Build the recurring snapshot plan (nightly bedtime sessions by default).
pub fn schedule_snapshot(
    calendar: &str,
    duration_s: u64,
) -> Result<SnapshotPlan, SchedulerError> {
    Ok(SnapshotPlan {
        calendar: SnapshotCalendar::parse(calendar)?,
        duration_s,
    })
}

/// One line of the append-only job log.
#[derive(Debug, Clone, PartialEq)]
pub struct JobLogEntry {
    pub commit_id: String,
    pub target: String,
    /// fuzz | skip | error | snapshot | interrupted | cancelled
    pub decision: String,
    pub priority: String,
    pub duration_s: f64,
    pub start: f64,
    pub end: f64,
}

/// Append-only, line-oriented job log (tab-separated fields).
pub struct JobLog {
    path: PathBuf,
}

impl JobLog {
    pub fn new(path: &Path) -> Self {
        JobLog {
            path: path.to_path_buf(),
        }
    }

    pub fn append(&self, entry: &JobLogEntry) -> Result<(), SchedulerError> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            entry.commit_id,
            entry.target,
            entry.decision,
            entry.priority,
            entry.duration_s,
            entry.start,
            entry.end
        )?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Vec<JobLogEntry>, SchedulerError> {
        let text = std::fs::read_to_string(path)?;
        let mut out = Vec::new();
        for line in text.lines() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                continue;
            }
            out.push(JobLogEntry {
                commit_id: cols[0].to_string(),
                target: cols[1].to_string(),
                decision: cols[2].to_string(),
                priority: cols[3].to_string(),
                duration_s: cols[4].parse().unwrap_or(0.0),
                start: cols[5].parse().unwrap_or(0.0),
                end: cols[6].parse().unwrap_or(0.0),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commit::FileChange;

    fn commit(kind: CommitKind, files: &[(&str, u64)], message: &str) -> CommitRecord {
        CommitRecord {
            id: "c1".into(),
            parent_ids: match kind {
                CommitKind::Merge => vec!["p1".into(), "p2".into()],
                _ => vec!["p1".into()],
            },
            timestamp: 1000,
            author: "dev".into(),
            message: message.into(),
            changed_files: files
                .iter()
                .map(|(p, lines)| FileChange {
                    path: p.to_string(),
                    lines_added: *lines,
                    lines_removed: 0,
                })
                .collect(),
            kind,
            branch: "main".into(),
        }
    }

    #[test]
    fn priority_table() {
        let rules = PriorityRules::default();
        let cases: Vec<(CommitRecord, Priority)> = vec![
            // Docs-only individual commit floors at low.
            (
                commit(CommitKind::Individual, &[("README.md", 3)], "docs"),
                Priority::Low,
            ),
            // Merge with code goes high.
            (
                commit(CommitKind::Merge, &[("src/a.c", 10)], "merge branch"),
                Priority::High,
            ),
            // Individual + code (+1) + 600 lines (+1) -> high.
            (
                commit(CommitKind::Individual, &[("src/a.c", 600)], "big change"),
                Priority::High,
            ),
            // Individual + code -> medium.
            (
                commit(CommitKind::Individual, &[("src/a.c", 10)], "tweak"),
                Priority::Medium,
            ),
            // Group + code saturates at high via keyword.
            (
                commit(CommitKind::Group, &[("src/a.c", 10)], "security hardening"),
                Priority::High,
            ),
            // Docs-only merge capped at low, keyword lifts it to medium.
            (
                commit(CommitKind::Merge, &[("index.html", 5)], "security docs"),
                Priority::Medium,
            ),
            // Group of non-code files capped at low.
            (
                commit(CommitKind::Group, &[("index.html", 5)], "markup"),
                Priority::Low,
            ),
        ];
        for (c, expected) in cases {
            assert_eq!(assign_priority(&c, &rules), expected, "commit {c:?}");
        }
    }

    #[test]
    fn priority_is_pure() {
        let rules = PriorityRules::default();
        let c = commit(CommitKind::Group, &[("src/x.rs", 80)], "refactor parser");
        assert_eq!(assign_priority(&c, &rules), assign_priority(&c, &rules));
    }

    #[test]
    fn ladder_ordering_enforced() {
        assert!(DurationLadder::default().validate().is_ok());
        let ladder = DurationLadder::default();
        assert!(ladder.duration_for(Priority::Low) < ladder.duration_for(Priority::Medium));
        assert!(ladder.duration_for(Priority::Medium) < ladder.duration_for(Priority::High));
        let bad = DurationLadder {
            low: 900,
            medium: 900,
            high: 28800,
        };
        assert!(bad.validate().is_err());
    }

    fn stamped(id: &str, ts: i64) -> CommitRecord {
        let mut c = commit(CommitKind::Individual, &[("src/a.c", 1)], "m");
        c.id = id.to_string();
        c.timestamp = ts;
        c
    }

    #[test]
    fn queue_rejects_out_of_order() {
        let mut q = CommitQueue::new();
        q.enqueue(stamped("a", 100)).unwrap();
        q.enqueue(stamped("b", 100)).unwrap(); // ties allowed (group pushes)
        assert!(matches!(
            q.enqueue(stamped("c", 99)),
            Err(SchedulerError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn process_all_pops_fifo() {
        let mut q = CommitQueue::new();
        for (id, ts) in [("a", 1), ("b", 2), ("c", 3)] {
            q.enqueue(stamped(id, ts)).unwrap();
        }
        let mut seen = Vec::new();
        while let Some(plan) = q.next_job(QueueMode::ProcessAll) {
            assert_eq!(plan.fingerprint_commits.len(), 1);
            seen.push(plan.campaign_commit.id);
        }
        assert_eq!(seen, vec!["a", "b", "c"]);
    }

    #[test]
    fn latest_only_coalesces_but_fingerprints_all() {
        let mut q = CommitQueue::new();
        for (id, ts) in [("a", 1), ("b", 2), ("c", 3)] {
            q.enqueue(stamped(id, ts)).unwrap();
        }
        let plan = q.next_job(QueueMode::LatestOnly).unwrap();
        assert_eq!(plan.campaign_commit.id, "c");
        assert_eq!(plan.fingerprint_commits.len(), 3);
        assert!(q.is_empty());
    }

    #[test]
    fn allocate_two_jobs_fit_budget_eight() {
        let s = allocate_cores(&[900.0, 900.0], 3, 8).unwrap();
        assert_eq!(s.entries[0].start_offset, 0.0);
        assert_eq!(s.entries[1].start_offset, 0.0);
        assert_eq!(s.peak_demand, 6);
        assert_eq!(s.makespan, 900.0);
    }

    #[test]
    fn allocate_third_job_waits() {
        let s = allocate_cores(&[900.0, 900.0, 900.0], 3, 8).unwrap();
        assert_eq!(s.entries[2].start_offset, 900.0);
        assert_eq!(s.peak_demand, 6);
        assert_eq!(s.makespan, 1800.0);
    }

    #[test]
    fn allocate_skipped_targets_shrink_demand() {
        // 5 targets, 4 skipped: only one campaign -> 3 cores, not 15.
        let s = allocate_cores(&[900.0], 3, 16).unwrap();
        assert_eq!(s.peak_demand, 3);
        let all = allocate_cores(&[900.0; 5], 3, 16).unwrap();
        assert_eq!(all.peak_demand, 15);
    }

    #[test]
    fn allocate_rejects_oversized_job() {
        assert!(matches!(
            allocate_cores(&[900.0], 4, 3),
            Err(SchedulerError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn allocate_never_oversubscribes() {
        let durations: Vec<f64> = (1..=9).map(|i| (i as f64) * 100.0).collect();
        let budget = 7u32;
        let ensemble = 3u32;
        let s = allocate_cores(&durations, ensemble, budget).unwrap();
        // Sample the timeline at every start/end point.
        let mut points = Vec::new();
        for (e, d) in s.entries.iter().zip(&durations) {
            points.push(e.start_offset);
            points.push(e.start_offset + d);
        }
        for &t in &points {
            let usage: u32 = s
                .entries
                .iter()
                .zip(&durations)
                .filter(|(e, d)| e.start_offset <= t && t < e.start_offset + **d)
                .count() as u32
                * ensemble;
            assert!(usage <= budget, "oversubscribed at t={t}: {usage}");
        }
        assert!(s.peak_demand <= budget);
    }

    #[test]
    fn calendar_parsing_and_occurrences() {
        let daily = SnapshotCalendar::parse("daily@02:00").unwrap();
        assert_eq!(daily, SnapshotCalendar::Daily { hour: 2, minute: 0 });
        // Three simulated days -> exactly three occurrences.
        let occ = daily.occurrences(0, 3 * 86400);
        assert_eq!(occ.len(), 3);
        assert_eq!(occ[0], 7200);
        assert_eq!(occ[1], 86400 + 7200);
        let every = SnapshotCalendar::parse("every:3600").unwrap();
        assert_eq!(every.occurrences(100, 7300), vec![3600, 7200]);
        assert!(SnapshotCalendar::parse("weekly@02:00").is_err());
        assert!(SnapshotCalendar::parse("daily@25:00").is_err());
        assert!(SnapshotCalendar::parse("every:0").is_err());
    }

    #[test]
    fn snapshot_plan_uses_given_duration() {
        let plan = schedule_snapshot("daily@02:00", 28800).unwrap();
        assert_eq!(plan.duration_s, 28800);
        assert!(schedule_snapshot("bogus", 1).is_err());
    }

    #[test]
    fn job_log_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("jobs.tsv");
        let log = JobLog::new(&path);
        let e1 = JobLogEntry {
            commit_id: "c1".into(),
            target: "t1".into(),
            decision: "fuzz".into(),
            priority: "low".into(),
            duration_s: 900.0,
            start: 0.0,
            end: 900.0,
        };
        let e2 = JobLogEntry {
            commit_id: "c1".into(),
            target: "t2".into(),
            decision: "skip".into(),
            priority: "low".into(),
            duration_s: 0.0,
            start: 0.0,
            end: 0.0,
        };
        log.append(&e1).unwrap();
        log.append(&e2).unwrap();
        let back = JobLog::read(&path).unwrap();
        assert_eq!(back, vec![e1, e2]);
    }

    #[test]
    fn baseline_store_tracks_last_fuzzed() {
        let mut b = BaselineStore::new();
        let d1 = Digest::of(b"v1");
        let d2 = Digest::of(b"v2");
        assert!(!b.matches("t", &d1));
        b.advance("t", d1);
        assert!(b.matches("t", &d1));
        b.advance("t", d2);
        assert!(!b.matches("t", &d1));
        assert!(b.matches("t", &d2));
    }
}
