//! Target builds and normalized content digests.
//!
//! A fuzz target is rebuilt at every commit; its bytes are normalized with
//! [`ScrubRules`] and hashed. Equal digests mean the compiled target is
//! byte-identical modulo scrubbed regions, so fuzzing it again cannot find
//! anything new and the campaign can be skipped.

mod cache;
mod scrub;

pub use cache::FingerprintCache;
pub use scrub::{ScrubRules, FILLER};

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest;
use crate::procutil::run_with_deadline;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("scrub rule {name}: {detail}")]
    BadRule { name: String, detail: String },
    #[error("target {0} is unfingerprintable: build failed")]
    Unfingerprintable(String),
    #[error("empty build plan")]
    EmptyBuildPlan,
    #[error("fingerprint cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A compiled fuzz target (or the record of a failed attempt).
#[derive(Debug, Clone)]
pub struct TargetArtifact {
    pub target_name: String,
    pub commit_id: String,
    pub bytes: Vec<u8>,
    pub build_ok: bool,
    pub build_log: String,
}

impl TargetArtifact {
    pub fn built(target_name: &str, commit_id: &str, bytes: Vec<u8>) -> Self {
        TargetArtifact {
            target_name: target_name.to_string(),
            commit_id: commit_id.to_string(),
            bytes,
            build_ok: true,
            build_log: String::new(),
        }
    }

    pub fn failed(target_name: &str, commit_id: &str, log: String) -> Self {
        TargetArtifact {
            target_name: target_name.to_string(),
            commit_id: commit_id.to_string(),
            bytes: Vec::new(),
            build_ok: false,
            build_log: log,
        }
    }
}

/// Normalized digest of one target at one commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFingerprint {
    pub target_name: String,
    pub commit_id: String,
    pub digest: Digest,
    pub normalization_applied: Vec<String>,
}

/// Apply scrub rules to raw artifact bytes. Deterministic and idempotent;
/// an empty ruleset is the identity.
pub fn normalize(bytes: &[u8], rules: &ScrubRules) -> Vec<u8> {
    rules.apply(bytes).0
}

/// Digest of the normalized bytes.
pub fn fingerprint(
    artifact: &TargetArtifact,
    rules: &ScrubRules,
) -> Result<TargetFingerprint, FingerprintError> {
    if !artifact.build_ok {
        return Err(FingerprintError::Unfingerprintable(
            artifact.target_name.clone(),
        ));
    }
    let (normalized, applied) = rules.apply(&artifact.bytes);
    Ok(TargetFingerprint {
        target_name: artifact.target_name.clone(),
        commit_id: artifact.commit_id.clone(),
        digest: Digest::of(&normalized),
        normalization_applied: applied,
    })
}

/// Per-target outcome of fingerprinting one commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetState {
    Fingerprinted(TargetFingerprint),
    Unbuildable,
}

/// The fingerprint state of all targets at one point (a commit, or the
/// last-fuzzed baseline assembled across commits).
#[derive(Debug, Clone, Default)]
pub struct FingerprintSet {
    per_target: BTreeMap<String, TargetState>,
}

impl FingerprintSet {
    pub fn new() -> Self {
        FingerprintSet::default()
    }

    pub fn from_artifacts(
        artifacts: &[TargetArtifact],
        rules: &ScrubRules,
    ) -> Result<Self, FingerprintError> {
        let mut set = FingerprintSet::new();
        for a in artifacts {
            if a.build_ok {
                set.insert(fingerprint(a, rules)?);
            } else {
                set.mark_unbuildable(&a.target_name);
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, fp: TargetFingerprint) {
        self.per_target
            .insert(fp.target_name.clone(), TargetState::Fingerprinted(fp));
    }

    pub fn mark_unbuildable(&mut self, target: &str) {
        self.per_target
            .insert(target.to_string(), TargetState::Unbuildable);
    }

    pub fn digest_of(&self, target: &str) -> Option<&Digest> {
        match self.per_target.get(target) {
            Some(TargetState::Fingerprinted(fp)) => Some(&fp.digest),
            _ => None,
        }
    }

    pub fn get(&self, target: &str) -> Option<&TargetState> {
        self.per_target.get(target)
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.per_target.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TargetState)> {
        self.per_target.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.per_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_target.is_empty()
    }
}

/// Per-target classification of current fingerprints against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeStatus {
    Identical,
    Changed,
    New,
    Removed,
    Unbuildable,
}

#[derive(Debug, Clone)]
pub struct ChangeSet {
    pub commit_id: String,
    pub per_target: BTreeMap<String, ChangeStatus>,
}

impl ChangeSet {
    pub fn count(&self, status: ChangeStatus) -> usize {
        self.per_target.values().filter(|&&s| s == status).count()
    }
}

/// Compare the current fingerprint state against a baseline.
///
/// `identical` requires equal digests; targets present on one side only are
/// `new` / `removed`; a target that failed to build now is `unbuildable`
/// regardless of the baseline (policy decides what to do with it).
pub fn compare(commit_id: &str, current: &FingerprintSet, baseline: &FingerprintSet) -> ChangeSet {
    let mut per_target = BTreeMap::new();
    for (name, state) in current.iter() {
        let status = match state {
            TargetState::Unbuildable => ChangeStatus::Unbuildable,
            TargetState::Fingerprinted(fp) => match baseline.get(name) {
                None => ChangeStatus::New,
                Some(TargetState::Unbuildable) => ChangeStatus::Changed,
                Some(TargetState::Fingerprinted(base)) => {
                    if base.digest == fp.digest {
                        ChangeStatus::Identical
                    } else {
                        ChangeStatus::Changed
                    }
                }
            },
        };
        per_target.insert(name.to_string(), status);
    }
    for (name, _) in baseline.iter() {
        per_target
            .entry(name.to_string())
            .or_insert(ChangeStatus::Removed);
    }
    ChangeSet {
        commit_id: commit_id.to_string(),
        per_target,
    }
}

/// How to build one target: a shell command template.
///
/// Substitution variables: `{out}` (path the command must write the compiled
/// target to), `{workdir}`, `{commit}`, `{target}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBuildPlan {
    pub name: String,
    pub command: String,
}

fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

/// Build every configured target at the checked-out commit in `workdir`.
///
/// Failures are captured per target (`build_ok = false`, log populated),
/// never thrown; the caller decides policy.
pub fn build_targets(
    commit_id: &str,
    plan: &[TargetBuildPlan],
    workdir: &Path,
    timeout: Duration,
) -> Result<Vec<TargetArtifact>, FingerprintError> {
    if plan.is_empty() {
        return Err(FingerprintError::EmptyBuildPlan);
    }
    let out_dir = workdir.join(".fuzzmill-out");
    std::fs::create_dir_all(&out_dir)?;
    let mut artifacts = Vec::with_capacity(plan.len());
    for target in plan {
        let out_path = out_dir.join(format!("{}.bin", target.name));
        let _ = std::fs::remove_file(&out_path);
        let cmdline = substitute(
            &target.command,
            &[
                ("out", &out_path.display().to_string()),
                ("workdir", &workdir.display().to_string()),
                ("commit", commit_id),
                ("target", &target.name),
            ],
        );
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(&cmdline).current_dir(workdir);
        let artifact = match run_with_deadline(cmd, timeout) {
            Ok(outcome) => {
                let mut log = outcome.log_text();
                if outcome.timed_out {
                    log.push_str("\n[build timed out]");
                }
                if outcome.success() && !outcome.timed_out {
                    match std::fs::read(&out_path) {
                        Ok(bytes) if !bytes.is_empty() => {
                            let mut a =
                                TargetArtifact::built(&target.name, commit_id, bytes);
                            a.build_log = log;
                            a
                        }
                        Ok(_) => TargetArtifact::failed(
                            &target.name,
                            commit_id,
                            format!("{log}\n[build produced an empty artifact]"),
                        ),
                        Err(e) => TargetArtifact::failed(
                            &target.name,
                            commit_id,
                            format!("{log}\n[build produced no artifact: {e}]"),
                        ),
                    }
                } else {
                    let code = outcome
                        .exit_code
                        .map(|c| c.to_string())
                        .unwrap_or_else(|| "killed".into());
                    TargetArtifact::failed(
                        &target.name,
                        commit_id,
                        format!("{log}\n[exit status: {code}]"),
                    )
                }
            }
            Err(e) => {
                TargetArtifact::failed(&target.name, commit_id, format!("spawn failed: {e}"))
            }
        };
        artifacts.push(artifact);
    }
    Ok(artifacts)
}
