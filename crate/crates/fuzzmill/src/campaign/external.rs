//! External fuzzer adapter: spawn a real fuzzer process with corpus-in /
//! corpus-out directories and a hard deadline, then harvest its findings.
//!
//! Command template substitution variables: `{target}`, `{corpus_in}`,
//! `{corpus_out}`, `{artifacts}`, `{duration_s}`, `{seed}`.
//!
//! Conventions for harvesting:
//! - every regular file in `{corpus_out}` (except the optional `coverage`
//!   index) is a new corpus input;
//! - a `coverage` index file maps input file names to edge ids, one line
//!   each: `<file name> <space-separated decimal edge ids>`;
//! - a file under `{artifacts}` whose name contains `bug:<id>` attributes a
//!   detected bug.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusInput, CoverageSignature, InputOrigin};
use crate::procutil::run_with_deadline;

use super::{BackendRun, CampaignError, EventTimes};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBackendConfig {
    pub name: String,
    pub command: String,
}

/// Everything an external backend invocation needs on disk.
#[derive(Debug, Clone)]
pub struct ExternalContext {
    pub target_path: PathBuf,
    pub corpus_in: PathBuf,
    pub corpus_out: PathBuf,
    pub artifacts: PathBuf,
    pub duration_s: f64,
    pub seed: u64,
    /// Extra wall time past `duration_s` before the process is killed.
    pub grace_s: f64,
}

/// Default grace: 10% of the duration or 30 s, whichever is larger.
pub fn default_grace(duration_s: f64) -> f64 {
    (duration_s * 0.1).max(30.0)
}

pub fn external_fuzz(
    cfg: &ExternalBackendConfig,
    ctx: &ExternalContext,
) -> Result<BackendRun, CampaignError> {
    std::fs::create_dir_all(&ctx.corpus_in)?;
    std::fs::create_dir_all(&ctx.corpus_out)?;
    std::fs::create_dir_all(&ctx.artifacts)?;

    let cmdline = cfg
        .command
        .replace("{target}", &ctx.target_path.display().to_string())
        .replace("{corpus_in}", &ctx.corpus_in.display().to_string())
        .replace("{corpus_out}", &ctx.corpus_out.display().to_string())
        .replace("{artifacts}", &ctx.artifacts.display().to_string())
        .replace("{duration_s}", &format!("{}", ctx.duration_s))
        .replace("{seed}", &ctx.seed.to_string());
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(&cmdline);
    let deadline = Duration::from_secs_f64((ctx.duration_s + ctx.grace_s).max(0.001));
    let outcome = run_with_deadline(cmd, deadline)?;

    let mut run = BackendRun::new(&cfg.name);
    run.cpu_seconds = outcome.elapsed.as_secs_f64();
    if outcome.timed_out {
        run.warnings
            .push(format!("killed at deadline after {:.1}s", run.cpu_seconds));
    }

    // Shell exit 127/126: command not found / not executable.
    if let Some(code @ (126 | 127)) = outcome.exit_code {
        return Err(CampaignError::Backend {
            backend: cfg.name.clone(),
            detail: format!(
                "executable missing or not runnable (exit {code}): {}",
                String::from_utf8_lossy(&outcome.stderr).trim()
            ),
        });
    }

    harvest_crash_artifacts(&ctx.artifacts, ctx.duration_s, &mut run)?;
    harvest_corpus_out(&ctx.corpus_out, &cfg.name, &mut run)?;

    if !outcome.success() && !outcome.timed_out && run.detected.is_empty() {
        run.warnings.push(format!(
            "backend exited with status {:?} and produced no crash artifacts",
            outcome.exit_code
        ));
        run.new_inputs.clear();
        run.reached.clear();
        run.triggered.clear();
        run.event_times.clear();
    }
    Ok(run)
}

fn harvest_crash_artifacts(
    dir: &Path,
    duration_s: f64,
    run: &mut BackendRun,
) -> Result<(), CampaignError> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    for name in names {
        if let Some(id) = extract_bug_id(&name) {
            run.reached.insert(id.clone());
            run.triggered.insert(id.clone());
            run.detected.insert(id.clone());
            run.event_times.entry(id).or_insert(EventTimes {
                reached: Some(duration_s),
                triggered: Some(duration_s),
                detected: Some(duration_s),
            });
        }
    }
    Ok(())
}

fn extract_bug_id(name: &str) -> Option<String> {
    let idx = name.find("bug:")?;
    let tail = &name[idx + 4..];
    let id: String = tail
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
        .collect();
    if id.is_empty() {
        None
    } else {
        Some(id)
    }
}

const COVERAGE_INDEX: &str = "coverage";

fn harvest_corpus_out(
    dir: &Path,
    backend: &str,
    run: &mut BackendRun,
) -> Result<(), CampaignError> {
    let coverage = parse_coverage_index(&dir.join(COVERAGE_INDEX), run);
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != COVERAGE_INDEX {
                names.push(name);
            }
        }
    }
    names.sort();
    for name in names {
        let bytes = std::fs::read(dir.join(&name))?;
        let signature = match coverage.get(&name) {
            Some(edges) => CoverageSignature::new(edges.iter().copied()),
            None => {
                run.warnings
                    .push(format!("no coverage data for corpus output {name}; kept with empty signature"));
                CoverageSignature::empty()
            }
        };
        run.new_inputs.push(CorpusInput::new(
            bytes,
            signature,
            InputOrigin::Fuzzer(backend.to_string()),
            0.0,
        ));
    }
    Ok(())
}

fn parse_coverage_index(path: &Path, run: &mut BackendRun) -> BTreeMap<String, Vec<u32>> {
    let mut map = BTreeMap::new();
    let Ok(text) = std::fs::read_to_string(path) else {
        return map;
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let Some(name) = cols.next() else { continue };
        match cols.map(str::parse::<u32>).collect::<Result<Vec<_>, _>>() {
            Ok(edges) => {
                map.insert(name.to_string(), edges);
            }
            Err(e) => {
                // Unparsable coverage: the input stays, flagged, with an
                // empty signature.
                run.warnings
                    .push(format!("unparsable coverage data for {name}: {e}"));
            }
        }
    }
    map
}
