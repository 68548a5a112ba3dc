//! End-to-end loops: the per-commit continuous pipeline (`run`) and the
//! backwards history scan (`scan`).
//!
//! The run loop advances a virtual clock driven by commit timestamps and
//! campaign durations. Mock campaigns are instant in wall time, so policy
//! effects (coalescing, interruption, snapshots) are fully deterministic and
//! testable at desk scale; external campaigns simply occupy real time while
//! the virtual timeline advances by their configured duration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use thiserror::Error;

use crate::campaign::{
    run_campaign, Backend, BackendKind, CampaignEnv, CampaignError, CampaignSpec,
};
use crate::commit::{checkout, walk_history, CommitError, CommitRecord, HistoryRange};
use crate::corpus::{Corpus, CorpusError};
use crate::digest::{derive_seed, Digest};
use crate::fingerprint::{
    build_targets, compare, FingerprintCache, FingerprintError, FingerprintSet, ScrubRules,
    TargetArtifact, TargetBuildPlan, TargetFingerprint, TargetState,
};
use crate::report::ReportError;
use crate::scheduler::{
    allocate_cores, assign_priority, BaselineStore, CommitQueue, DurationLadder, JobLog,
    JobLogEntry, PriorityRules, QueueMode, QueuePolicy, SchedulerError, SnapshotPlan,
};
use crate::selection::{
    accumulate, decide, SelectionDecision, SelectionError, SelectionPolicy, SelectionStats,
    TargetDecision,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("scan needs at least 2 commits to compare")]
    ScanNeedsTwoCommits,
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Produces the built fuzz targets for a commit.
///
/// Implementations memoize per commit id: repeated calls for the same commit
/// return identical artifacts.
pub trait ArtifactSource {
    fn artifacts_at(&mut self, commit: &CommitRecord) -> Result<Vec<TargetArtifact>, PipelineError>;
    fn target_names(&self) -> Vec<String>;
}

/// Real builds: check out the commit into a worktree and run the build plan.
pub struct BuildSource {
    repo: PathBuf,
    worktree: PathBuf,
    plan: Vec<TargetBuildPlan>,
    timeout: Duration,
    memo: BTreeMap<String, Vec<TargetArtifact>>,
}

impl BuildSource {
    pub fn new(repo: PathBuf, worktree: PathBuf, plan: Vec<TargetBuildPlan>, timeout: Duration) -> Self {
        BuildSource {
            repo,
            worktree,
            plan,
            timeout,
            memo: BTreeMap::new(),
        }
    }
}

impl ArtifactSource for BuildSource {
    fn artifacts_at(&mut self, commit: &CommitRecord) -> Result<Vec<TargetArtifact>, PipelineError> {
        if let Some(arts) = self.memo.get(&commit.id) {
            return Ok(arts.clone());
        }
        checkout(&self.repo, &commit.id, &self.worktree)?;
        let arts = build_targets(&commit.id, &self.plan, &self.worktree, self.timeout)?;
        self.memo.insert(commit.id.clone(), arts.clone());
        Ok(arts)
    }

    fn target_names(&self) -> Vec<String> {
        self.plan.iter().map(|t| t.name.clone()).collect()
    }
}

/// Synthetic builds for synthetic streams: each target owns a slice of the
/// file universe (round-robin by position) and its "binary" is a hash chain
/// that advances whenever a commit touches an owned file.
pub struct SynthSource {
    targets: Vec<String>,
    owner_of: BTreeMap<String, usize>,
    state: BTreeMap<String, Digest>,
    memo: BTreeMap<String, Vec<TargetArtifact>>,
}

impl SynthSource {
    pub fn new(target_names: Vec<String>, file_universe: &[String]) -> Self {
        let owner_of = file_universe
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i % target_names.len().max(1)))
            .collect();
        let state = target_names
            .iter()
            .map(|t| (t.clone(), Digest::of(t.as_bytes())))
            .collect();
        SynthSource {
            targets: target_names,
            owner_of,
            state,
            memo: BTreeMap::new(),
        }
    }

    /// Which targets a commit's changed files belong to.
    pub fn touched_targets(&self, commit: &CommitRecord) -> BTreeSet<usize> {
        commit
            .changed_files
            .iter()
            .filter_map(|f| self.owner_of.get(&f.path).copied())
            .collect()
    }
}

impl ArtifactSource for SynthSource {
    fn artifacts_at(&mut self, commit: &CommitRecord) -> Result<Vec<TargetArtifact>, PipelineError> {
        if let Some(arts) = self.memo.get(&commit.id) {
            return Ok(arts.clone());
        }
        let touched = self.touched_targets(commit);
        for (i, t) in self.targets.iter().enumerate() {
            if touched.contains(&i) {
                let prev = self.state[t];
                let next = Digest::of_parts(&[&prev.0, commit.id.as_bytes()]);
                self.state.insert(t.clone(), next);
            }
        }
        let arts: Vec<TargetArtifact> = self
            .targets
            .iter()
            .map(|t| TargetArtifact::built(t, &commit.id, self.state[t].to_hex().into_bytes()))
            .collect();
        self.memo.insert(commit.id.clone(), arts.clone());
        Ok(arts)
    }

    fn target_names(&self) -> Vec<String> {
        self.targets.clone()
    }
}

fn baseline_as_set(baseline: &BaselineStore) -> FingerprintSet {
    let mut set = FingerprintSet::new();
    for (target, digest) in baseline.iter() {
        set.insert(TargetFingerprint {
            target_name: target.to_string(),
            commit_id: "(baseline)".to_string(),
            digest: *digest,
            normalization_applied: Vec::new(),
        });
    }
    set
}

/// Everything the run loop needs besides the stream and artifact source.
pub struct RunParams {
    pub scrub: ScrubRules,
    pub selection: SelectionPolicy,
    pub queue_policy: QueuePolicy,
    pub ladder: DurationLadder,
    pub priority_rules: PriorityRules,
    pub backends: Vec<Backend>,
    pub ensemble_size: u32,
    pub core_budget: u32,
    pub sanitizers: bool,
    pub rng_seed: u64,
    pub snapshot: Option<SnapshotPlan>,
    pub out_dir: PathBuf,
    pub library: String,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub commits_processed: usize,
    pub commits_failed: usize,
    pub campaigns_run: usize,
    pub campaigns_skipped: usize,
    pub campaigns_errored: usize,
    pub campaigns_interrupted: usize,
    pub campaigns_cancelled: usize,
    pub snapshots_run: usize,
    pub peak_core_demand: u32,
    pub cpu_seconds_used: f64,
    pub detected: BTreeSet<String>,
    pub stats: Option<SelectionStats>,
    pub final_baseline: BTreeMap<String, Digest>,
}

struct RunState<'a> {
    params: &'a RunParams,
    corpus_root: PathBuf,
    job_log: JobLog,
    cache: FingerprintCache,
    ruleset_hash: Digest,
    baseline: BaselineStore,
    decisions: Vec<SelectionDecision>,
    outcome: RunOutcome,
    now: f64,
}

impl<'a> RunState<'a> {
    fn log(&self, entry: JobLogEntry) -> Result<(), PipelineError> {
        self.job_log.append(&entry)?;
        Ok(())
    }

    /// Fingerprint one commit, appending cache records.
    fn fingerprint_commit(
        &mut self,
        source: &mut dyn ArtifactSource,
        commit: &CommitRecord,
    ) -> Result<FingerprintSet, PipelineError> {
        let arts = source.artifacts_at(commit)?;
        let set = FingerprintSet::from_artifacts(&arts, &self.params.scrub)?;
        for (_, state) in set.iter() {
            if let TargetState::Fingerprinted(fp) = state {
                if self.cache.lookup(&fp.commit_id, &fp.target_name).is_none() {
                    self.cache.append(fp, &self.ruleset_hash)?;
                }
            }
        }
        Ok(set)
    }

    /// Run one set of campaigns starting at `self.now`, honoring the core
    /// budget, optionally cancelled at `cancel_at`. Returns the virtual end.
    #[allow(clippy::too_many_arguments)]
    fn run_campaign_set(
        &mut self,
        source: &mut dyn ArtifactSource,
        commit: &CommitRecord,
        targets: &[String],
        duration_s: f64,
        priority: &str,
        decision_label: &str,
        cancel_at: Option<f64>,
        current: &FingerprintSet,
    ) -> Result<f64, PipelineError> {
        if targets.is_empty() {
            return Ok(self.now);
        }
        let durations = vec![duration_s; targets.len()];
        let schedule = allocate_cores(
            &durations,
            self.params.ensemble_size,
            self.params.core_budget,
        )?;
        self.outcome.peak_core_demand =
            self.outcome.peak_core_demand.max(schedule.peak_demand);
        let job_end = self.now + schedule.makespan;
        let effective_end = cancel_at.unwrap_or(job_end).min(job_end);

        let backend_names: Vec<String> =
            self.params.backends.iter().map(|b| b.name.clone()).collect();
        let has_external = self
            .params
            .backends
            .iter()
            .any(|b| matches!(b.kind, BackendKind::External(_)));

        for entry in &schedule.entries {
            let target = &targets[entry.spec_index];
            let start = self.now + entry.start_offset;
            let planned_end = start + duration_s;
            if start >= effective_end {
                // Cancelled before it ever started: baseline stays put, a
                // later commit will pick the change up.
                self.log(JobLogEntry {
                    commit_id: commit.id.clone(),
                    target: target.clone(),
                    decision: "cancelled".into(),
                    priority: priority.into(),
                    duration_s,
                    start,
                    end: start,
                })?;
                self.outcome.campaigns_cancelled += 1;
                continue;
            }
            let actual_end = planned_end.min(effective_end);
            let actual_duration = actual_end - start;
            let interrupted = actual_end < planned_end;

            // Pipeline order per commit: compile -> minimize -> fuzz -> merge.
            let seed_corpus = Corpus::load(target, &self.corpus_root)?.minimize();
            let spec = CampaignSpec {
                target_name: target.clone(),
                commit_id: commit.id.clone(),
                duration_s: actual_duration,
                backends: backend_names.clone(),
                seed_corpus: self.corpus_root.join(target).display().to_string(),
                rng_seed: derive_seed(
                    self.params.rng_seed,
                    &format!("campaign/{}/{target}", commit.id),
                ),
                sanitizers_enabled: self.params.sanitizers,
            };
            let env = if has_external {
                let work = self
                    .params
                    .out_dir
                    .join("campaign-work")
                    .join(&commit.id)
                    .join(target);
                std::fs::create_dir_all(&work)?;
                let bin = work.join("target.bin");
                if let Ok(arts) = source.artifacts_at(commit) {
                    if let Some(a) = arts.iter().find(|a| &a.target_name == target && a.build_ok) {
                        std::fs::write(&bin, &a.bytes)?;
                    }
                }
                CampaignEnv {
                    work_root: Some(work),
                    target_path: Some(bin),
                }
            } else {
                CampaignEnv::default()
            };
            let result = run_campaign(&spec, &seed_corpus, &self.params.backends, &env)?;
            for (backend, err) in &result.backend_errors {
                log::warn!("campaign {}/{target}: backend {backend} failed: {err}", commit.id);
            }

            // Merge exactly once at campaign end (partial findings included
            // when interrupted, so the work is not wasted).
            let mut merged = seed_corpus;
            merged.merge_inputs(result.new_inputs.iter().cloned());
            merged.save(&self.corpus_root)?;

            if let Some(d) = current.digest_of(target) {
                self.baseline.advance(target, *d);
            }
            self.outcome.detected.extend(result.detected.iter().cloned());
            self.outcome.cpu_seconds_used += result.cpu_seconds_used;
            self.outcome.campaigns_run += 1;
            if interrupted {
                self.outcome.campaigns_interrupted += 1;
            }
            self.log(JobLogEntry {
                commit_id: commit.id.clone(),
                target: target.clone(),
                decision: if interrupted {
                    "interrupted".into()
                } else {
                    decision_label.into()
                },
                priority: priority.into(),
                duration_s,
                start,
                end: actual_end,
            })?;
        }
        Ok(effective_end)
    }
}

/// Drive the full per-commit pipeline over a commit stream:
/// ingest -> fingerprint -> select -> schedule -> fuzz -> merge -> report.
pub fn run_loop(
    params: &RunParams,
    source: &mut dyn ArtifactSource,
    stream: &[CommitRecord],
    stop: &AtomicBool,
) -> Result<RunOutcome, PipelineError> {
    std::fs::create_dir_all(&params.out_dir)?;
    let mut state = RunState {
        corpus_root: params.out_dir.join("corpus"),
        job_log: JobLog::new(&params.out_dir.join("job_log.tsv")),
        cache: FingerprintCache::open(&params.out_dir.join("fingerprints.tsv"))?,
        ruleset_hash: params.scrub.ruleset_hash(),
        baseline: BaselineStore::new(),
        decisions: Vec::new(),
        outcome: RunOutcome::default(),
        now: stream.first().map(|c| c.timestamp as f64).unwrap_or(0.0),
        params,
    };
    let mut queue = CommitQueue::new();
    let mut arrivals = stream.iter().peekable();
    let mut last_processed: Option<CommitRecord> = None;
    let mut last_snapshot_at: Option<i64> = None;

    loop {
        if stop.load(Ordering::Relaxed) {
            log::info!("stop requested; draining");
            break;
        }
        while let Some(c) = arrivals.peek() {
            if c.timestamp as f64 <= state.now {
                queue.enqueue((*c).clone())?;
                arrivals.next();
            } else {
                break;
            }
        }

        if let Some(plan) = queue.next_job(params.queue_policy.mode) {
            let mut campaign_fps: Option<FingerprintSet> = None;
            let mut campaign_commit_failed = false;
            for c in &plan.fingerprint_commits {
                match state.fingerprint_commit(source, c) {
                    Ok(set) => {
                        if c.id == plan.campaign_commit.id {
                            campaign_fps = Some(set);
                        }
                    }
                    Err(e) => {
                        log::warn!("commit {} unprocessable: {e}", c.id);
                        state.outcome.commits_failed += 1;
                        if c.id == plan.campaign_commit.id {
                            campaign_commit_failed = true;
                        }
                    }
                }
                state.outcome.commits_processed += 1;
            }
            let commit = plan.campaign_commit.clone();
            if campaign_commit_failed {
                last_processed = Some(commit);
                continue;
            }
            let current = campaign_fps.expect("campaign commit was fingerprinted");

            let baseline_set = baseline_as_set(&state.baseline);
            let changeset = compare(&commit.id, &current, &baseline_set);
            let effective_policy = SelectionPolicy {
                skip_identical: params.selection.skip_identical && params.queue_policy.selective,
                error_policy: params.selection.error_policy,
            };
            let decision = decide(&changeset, &effective_policy);
            state.decisions.push(decision.clone());

            let priority = assign_priority(&commit, &params.priority_rules);
            let duration_s = params.ladder.duration_for(priority) as f64;

            let mut fuzz_targets = Vec::new();
            for (target, d) in &decision.per_target {
                match d {
                    TargetDecision::Fuzz => fuzz_targets.push(target.clone()),
                    TargetDecision::Skip => {
                        state.outcome.campaigns_skipped += 1;
                        state.log(JobLogEntry {
                            commit_id: commit.id.clone(),
                            target: target.clone(),
                            decision: "skip".into(),
                            priority: priority.as_str().into(),
                            duration_s: 0.0,
                            start: state.now,
                            end: state.now,
                        })?;
                    }
                    TargetDecision::Error => {
                        state.outcome.campaigns_errored += 1;
                        state.log(JobLogEntry {
                            commit_id: commit.id.clone(),
                            target: target.clone(),
                            decision: "error".into(),
                            priority: priority.as_str().into(),
                            duration_s: 0.0,
                            start: state.now,
                            end: state.now,
                        })?;
                    }
                }
            }

            let cancel_at = match params.queue_policy.mode {
                QueueMode::Interrupt => arrivals.peek().map(|c| c.timestamp as f64),
                _ => None,
            };
            let end = state.run_campaign_set(
                source,
                &commit,
                &fuzz_targets,
                duration_s,
                priority.as_str(),
                "fuzz",
                cancel_at,
                &current,
            )?;
            state.now = end.max(state.now);
            last_processed = Some(commit);
        } else if arrivals.peek().is_some() {
            let next_arrival = arrivals.peek().unwrap().timestamp;
            let snapshot_due = params.snapshot.as_ref().and_then(|plan| {
                last_processed.as_ref()?;
                // Occurrences that fell during a job are missed, not queued
                // up; only the next future one counts.
                let after = match last_snapshot_at {
                    Some(t) => (t + 1).max(state.now.ceil() as i64),
                    None => state.now.ceil() as i64,
                };
                let occ = plan.calendar.next_occurrence(after);
                (occ < next_arrival).then_some((occ, plan.clone()))
            });
            match snapshot_due {
                Some((occ, plan)) => {
                    state.now = state.now.max(occ as f64);
                    last_snapshot_at = Some(occ);
                    let commit = last_processed.clone().unwrap();
                    let current = state.fingerprint_commit(source, &commit)?;
                    let all_targets = source.target_names();
                    let end = state.run_campaign_set(
                        source,
                        &commit,
                        &all_targets,
                        plan.duration_s as f64,
                        "high",
                        "snapshot",
                        None,
                        &current,
                    )?;
                    state.outcome.snapshots_run += 1;
                    state.now = end.max(state.now);
                }
                None => {
                    state.now = next_arrival as f64;
                }
            }
        } else {
            break;
        }
    }

    let mut outcome = state.outcome;
    if !state.decisions.is_empty() {
        outcome.stats = Some(accumulate(
            state
                .decisions
                .iter()
                .map(|d| (params.library.as_str(), d)),
        )?);
    }
    outcome.final_baseline = state
        .baseline
        .iter()
        .map(|(t, d)| (t.to_string(), *d))
        .collect();
    Ok(outcome)
}

/// Parameters for the backwards history scan.
pub struct ScanParams {
    pub repo: PathBuf,
    pub branch: String,
    pub n_commits: usize,
    pub plan: Vec<TargetBuildPlan>,
    pub workdir: PathBuf,
    pub scrub: ScrubRules,
    pub library: String,
    pub out_dir: PathBuf,
    pub build_timeout: Duration,
}

#[derive(Debug)]
pub struct ScanOutcome {
    pub stats: SelectionStats,
    pub commits_walked: usize,
    pub pairs_compared: usize,
    /// True when the walk stopped because no target could be compiled
    /// anymore.
    pub stopped_early: bool,
}

/// Walk the most recent `n_commits` newest-to-oldest, building and
/// fingerprinting each, comparing each commit against its predecessor.
pub fn scan_repo(params: &ScanParams) -> Result<ScanOutcome, PipelineError> {
    if params.n_commits < 2 {
        return Err(PipelineError::ScanNeedsTwoCommits);
    }
    let commits = walk_history(
        &params.repo,
        &params.branch,
        &HistoryRange::MostRecent(params.n_commits),
    )?;
    if commits.len() < 2 {
        return Err(PipelineError::ScanNeedsTwoCommits);
    }
    std::fs::create_dir_all(&params.out_dir)?;
    std::fs::create_dir_all(&params.workdir)?;
    let worktree = params.workdir.join("scan-worktree");
    let mut cache = FingerprintCache::open(&params.out_dir.join("fingerprints.tsv"))?;
    let ruleset_hash = params.scrub.ruleset_hash();
    let policy = SelectionPolicy::default();

    let mut decisions: Vec<SelectionDecision> = Vec::new();
    let mut newer: Option<(String, FingerprintSet)> = None;
    let mut walked = 0usize;
    let mut stopped_early = false;
    for commit in commits.iter().rev() {
        checkout(&params.repo, &commit.id, &worktree)?;
        let arts = build_targets(&commit.id, &params.plan, &worktree, params.build_timeout)?;
        walked += 1;
        if arts.iter().all(|a| !a.build_ok) {
            // Automated target compilation no longer possible; stop here.
            log::warn!(
                "all targets failed to build at {}; stopping scan",
                commit.id
            );
            stopped_early = true;
            break;
        }
        let set = FingerprintSet::from_artifacts(&arts, &params.scrub)?;
        for (_, st) in set.iter() {
            if let TargetState::Fingerprinted(fp) = st {
                cache.append(fp, &ruleset_hash)?;
            }
        }
        if let Some((newer_id, newer_set)) = &newer {
            let changeset = compare(newer_id, newer_set, &set);
            decisions.push(decide(&changeset, &policy));
        }
        newer = Some((commit.id.clone(), set));
    }
    // Best-effort worktree cleanup.
    let _ = std::process::Command::new("git")
        .arg("-C")
        .arg(&params.repo)
        .arg("worktree")
        .arg("remove")
        .arg("--force")
        .arg(&worktree)
        .output();

    let stats = accumulate(decisions.iter().map(|d| (params.library.as_str(), d)))?;
    Ok(ScanOutcome {
        stats,
        commits_walked: walked,
        pairs_compared: decisions.len(),
        stopped_early,
    })
}
