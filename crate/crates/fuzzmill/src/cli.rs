//! The four workflows behind the `fuzzmill` binary: scan, run, simulate,
//! report.
//!
//! Exit codes: 0 success, 1 fatal configuration/environment error,
//! 2 completed with per-commit failures.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::MockModel;
use crate::commit::{synth_stream, walk_history, HistoryRange};
use crate::config::{Config, ConfigError, StreamMode};
use crate::pipeline::{
    run_loop, scan_repo, ArtifactSource, BuildSource, PipelineError, RunParams, ScanParams,
    SynthSource,
};
use crate::report::{
    emit_savings, emit_selection_stats, emit_sweep, savings_summary, DurationSweepReport,
    ReportError, ReportFormat, SavingsSummary,
};
use crate::scheduler::schedule_snapshot;
use crate::selection::SelectionStats;
use crate::simulate::{sweep_report, SimulatePlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn emit_all(
    config: &Config,
    emit: impl Fn(ReportFormat) -> Result<Vec<PathBuf>, ReportError>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for fmt in &config.report.formats {
        written.extend(emit(*fmt)?);
    }
    Ok(written)
}

/// `scan`: walk recent history backwards, fingerprint every target at every
/// commit, and report identical-target proportions.
pub fn cmd_scan(config: &Config, n_commits: usize) -> Result<i32, CliError> {
    let repo = config.stream.repo.as_ref().ok_or_else(|| {
        CliError::Usage("scan requires stream.mode = \"repo\" with a [stream.repo] section".into())
    })?;
    if config.build.targets.is_empty() {
        return Err(CliError::Usage(
            "scan requires [[build.targets]] build commands".into(),
        ));
    }
    let workdir = config
        .build
        .workdir
        .clone()
        .unwrap_or_else(|| config.output_dir.join("work"));
    let params = ScanParams {
        repo: repo.path.clone(),
        branch: repo.branch.clone(),
        n_commits,
        plan: config.build.targets.clone(),
        workdir,
        scrub: config.scrub.to_rules()?,
        library: config.selection.library.clone(),
        out_dir: config.output_dir.clone(),
        build_timeout: Duration::from_secs(config.build.timeout_secs),
    };
    let outcome = scan_repo(&params)?;
    let written = emit_all(
        config,
        |fmt| emit_selection_stats(&outcome.stats, fmt, &config.output_dir, "selection_stats"),
    )?;
    let savings = savings_summary(
        &outcome.stats,
        config.campaign.ensemble_size,
        config.scheduler.ladder.low,
    );
    let more = emit_all(
        config,
        |fmt| emit_savings(&savings, fmt, &config.output_dir, "savings"),
    )?;
    println!(
        "scan: {} commits walked, {} pairs compared{}",
        outcome.commits_walked,
        outcome.pairs_compared,
        if outcome.stopped_early {
            " (stopped: targets no longer compile)"
        } else {
            ""
        }
    );
    for lib in &outcome.stats.per_library {
        println!(
            "  {}: {} commits, {} harnesses, identical fraction {:.2}",
            lib.name, lib.commits_processed, lib.harnesses, lib.identical_fraction
        );
    }
    println!("  weighted mean: {:.2}", outcome.stats.weighted_mean);
    for p in written.iter().chain(&more) {
        println!("  wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

/// Summary written at the end of a `run`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
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
}

/// `run`: the continuous per-commit pipeline over the configured stream.
pub fn cmd_run(config: &Config, stop: &AtomicBool) -> Result<i32, CliError> {
    let stream = match config.stream.mode {
        StreamMode::Repo => {
            let repo = config.stream.repo.as_ref().expect("validated");
            let range = match repo_max_commits(config) {
                Some(n) => HistoryRange::MostRecent(n),
                None => HistoryRange::All,
            };
            walk_history(&repo.path, &repo.branch, &range).map_err(PipelineError::from)?
        }
        StreamMode::Synth => {
            let spec = config.stream.synth.as_ref().expect("validated");
            synth_stream(spec, config.rng_seed).map_err(PipelineError::from)?
        }
    };

    let mut source: Box<dyn ArtifactSource> = match config.stream.mode {
        StreamMode::Repo => {
            let repo = config.stream.repo.as_ref().expect("validated");
            if config.build.targets.is_empty() {
                return Err(CliError::Usage(
                    "run on a repo stream requires [[build.targets]]".into(),
                ));
            }
            let workdir = config
                .build
                .workdir
                .clone()
                .unwrap_or_else(|| config.output_dir.join("work"));
            std::fs::create_dir_all(&workdir)?;
            Box::new(BuildSource::new(
                repo.path.clone(),
                workdir.join("run-worktree"),
                config.build.targets.clone(),
                Duration::from_secs(config.build.timeout_secs),
            ))
        }
        StreamMode::Synth => {
            let spec = config.stream.synth.as_ref().expect("validated");
            let names: Vec<String> = if config.build.targets.is_empty() {
                (0..3).map(|i| format!("target-{i}")).collect()
            } else {
                config.build.targets.iter().map(|t| t.name.clone()).collect()
            };
            Box::new(SynthSource::new(names, &spec.file_universe))
        }
    };

    let snapshot = match &config.scheduler.snapshot {
        Some(s) => Some(
            schedule_snapshot(&s.calendar, s.duration_s).map_err(PipelineError::from)?,
        ),
        None => None,
    };
    let params = RunParams {
        scrub: config.scrub.to_rules()?,
        selection: config.selection.to_policy(),
        queue_policy: config.scheduler.queue_policy(),
        ladder: config.scheduler.ladder,
        priority_rules: config.scheduler.priority.clone(),
        backends: config.resolve_backends()?,
        ensemble_size: config.campaign.ensemble_size,
        core_budget: config.scheduler.core_budget,
        sanitizers: config.campaign.sanitizers,
        rng_seed: config.rng_seed,
        snapshot,
        out_dir: config.output_dir.clone(),
        library: config.selection.library.clone(),
    };
    let outcome = run_loop(&params, source.as_mut(), &stream, stop)?;

    if let Some(stats) = &outcome.stats {
        emit_all(
            config,
            |fmt| emit_selection_stats(stats, fmt, &config.output_dir, "selection_stats"),
        )?;
        let savings = savings_summary(
            stats,
            config.campaign.ensemble_size,
            config.scheduler.ladder.low,
        );
        emit_all(
            config,
            |fmt| emit_savings(&savings, fmt, &config.output_dir, "savings"),
        )?;
    }
    let summary = RunSummary {
        schema_version: crate::report::SCHEMA_VERSION,
        commits_processed: outcome.commits_processed,
        commits_failed: outcome.commits_failed,
        campaigns_run: outcome.campaigns_run,
        campaigns_skipped: outcome.campaigns_skipped,
        campaigns_errored: outcome.campaigns_errored,
        campaigns_interrupted: outcome.campaigns_interrupted,
        campaigns_cancelled: outcome.campaigns_cancelled,
        snapshots_run: outcome.snapshots_run,
        peak_core_demand: outcome.peak_core_demand,
        cpu_seconds_used: outcome.cpu_seconds_used,
        detected: outcome.detected.clone(),
    };
    let summary_path = config.output_dir.join("run_summary.json");
    std::fs::write(
        &summary_path,
        format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).map_err(ReportError::from)?
        ),
    )?;
    println!(
        "run: {} commits ({} failed), {} campaigns, {} skipped, {} bugs detected",
        outcome.commits_processed,
        outcome.commits_failed,
        outcome.campaigns_run,
        outcome.campaigns_skipped,
        outcome.detected.len()
    );
    println!("  wrote {}", summary_path.display());
    Ok(if outcome.commits_failed > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

fn repo_max_commits(config: &Config) -> Option<usize> {
    config.stream.repo.as_ref().and_then(|r| r.max_commits)
}

/// Overrides for `simulate` (flags beat config keys).
#[derive(Debug, Default, Clone)]
pub struct SimulateOverrides {
    pub durations_s: Option<Vec<u64>>,
    pub trials: Option<u32>,
    pub commits_per_trial: Option<u32>,
}

/// `simulate`: the duration-vs-effectiveness sweep on the mock backend.
pub fn cmd_simulate(config: &Config, overrides: &SimulateOverrides) -> Result<i32, CliError> {
    if config.simulate.models.is_empty() {
        return Err(CliError::Usage(
            "simulate requires at least one [[simulate.models]] entry".into(),
        ));
    }
    let mut models = Vec::new();
    for m in &config.simulate.models {
        let model = MockModel::load(&m.path).map_err(|e| ConfigError::Model {
            path: m.path.clone(),
            source: e,
        })?;
        models.push((m.name.clone(), Arc::new(model)));
    }
    let plan = SimulatePlan {
        models,
        durations_s: overrides
            .durations_s
            .clone()
            .unwrap_or_else(|| config.simulate.durations_s.clone()),
        trials: overrides.trials.unwrap_or(config.simulate.trials),
        commits_per_trial: overrides
            .commits_per_trial
            .unwrap_or(config.simulate.commits_per_trial),
        ensemble_size: config.campaign.ensemble_size,
        sanitizers: config.campaign.sanitizers,
        rng_seed: config.rng_seed,
    };
    let report = sweep_report(&plan)?;
    let mut written = emit_all(
        config,
        |fmt| emit_sweep(&report, fmt, &config.output_dir, "sweep"),
    )?;
    // Plot data is always useful for the sweep, even if not configured.
    if !config
        .report
        .formats
        .contains(&ReportFormat::PlotData)
    {
        written.extend(emit_sweep(
            &report,
            ReportFormat::PlotData,
            &config.output_dir,
            "sweep",
        )?);
    }
    println!(
        "simulate: {} libraries x {} durations x {} trials ({} commits per trial)",
        report.per_library.len(),
        report.durations_s.len(),
        plan.trials,
        plan.commits_per_trial
    );
    for (lib, cells) in &report.per_library {
        let first = cells.first();
        let last = cells.last();
        if let (Some(a), Some(b)) = (first, last) {
            println!(
                "  {lib}: mean detected {:.2} @ {}s -> {:.2} @ {}s",
                a.mean_detected, a.duration_s, b.mean_detected, b.duration_s
            );
        }
    }
    for p in &written {
        println!("  wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

/// `report`: re-emit a stored JSON report in another format.
pub fn cmd_report(input: &Path, format: ReportFormat, out_dir: &Path) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| {
        CliError::Usage(format!("cannot read report input {}: {e}", input.display()))
    })?;
    let basename = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let written = if let Ok(rep) = serde_json::from_str::<DurationSweepReport>(&text) {
        emit_sweep(&rep, format, out_dir, &basename)?
    } else if let Ok(stats) = serde_json::from_str::<SelectionStats>(&text) {
        emit_selection_stats(&stats, format, out_dir, &basename)?
    } else if let Ok(savings) = serde_json::from_str::<SavingsSummary>(&text) {
        emit_savings(&savings, format, out_dir, &basename)?
    } else {
        return Err(CliError::Usage(format!(
            "{} is not a recognized fuzzmill report",
            input.display()
        )));
    };
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn write_model(dir: &Path) -> PathBuf {
        let path = dir.join("model.txt");
        std::fs::write(
            &path,
            "edges 8 2\nrate 0.05 0.5\nB1 3 0.01 1.0 0\n",
        )
        .unwrap();
        path
    }

    fn sim_config(dir: &Path) -> Config {
        write_model(dir);
        let text = r#"
rng_seed = 9
output_dir = "out"
[stream]
mode = "synth"
[stream.synth]
n_commits = 4
file_universe = ["a.c", "b.c"]
merge_probability = 0.0
[simulate]
durations_s = [30, 120]
trials = 2
commits_per_trial = 3
[[simulate.models]]
name = "demo"
path = "model.txt"
"#;
        Config::from_str_for_tests(text, dir).unwrap()
    }

    #[test]
    fn simulate_writes_reports_and_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let config = sim_config(tmp.path());
        assert_eq!(cmd_simulate(&config, &SimulateOverrides::default()).unwrap(), EXIT_OK);
        let sweep = tmp.path().join("out/sweep.json");
        let first = std::fs::read(&sweep).unwrap();
        assert_eq!(cmd_simulate(&config, &SimulateOverrides::default()).unwrap(), EXIT_OK);
        let second = std::fs::read(&sweep).unwrap();
        assert_eq!(first, second, "same seed must give byte-identical output");
        for name in ["sweep.csv", "sweep_reached.csv", "sweep_triggered.csv", "sweep_detected.csv"] {
            assert!(tmp.path().join("out").join(name).exists(), "{name} missing");
        }
    }

    #[test]
    fn report_round_trips_between_formats() {
        let tmp = tempfile::tempdir().unwrap();
        let config = sim_config(tmp.path());
        cmd_simulate(&config, &SimulateOverrides::default()).unwrap();
        let input = tmp.path().join("out/sweep.json");
        let out2 = tmp.path().join("re-emitted");
        assert_eq!(cmd_report(&input, ReportFormat::Csv, &out2).unwrap(), EXIT_OK);
        assert!(out2.join("sweep.csv").exists());
        assert_eq!(cmd_report(&input, ReportFormat::Json, &out2).unwrap(), EXIT_OK);
        let back: DurationSweepReport = serde_json::from_str(
            &std::fs::read_to_string(out2.join("sweep.json")).unwrap(),
        )
        .unwrap();
        let orig: DurationSweepReport =
            serde_json::from_str(&std::fs::read_to_string(&input).unwrap()).unwrap();
        assert_eq!(back, orig);
    }

    #[test]
    fn report_rejects_unknown_input() {
        let tmp = tempfile::tempdir().unwrap();
        let bogus = tmp.path().join("x.json");
        std::fs::write(&bogus, "{\"hello\": 1}").unwrap();
        assert!(cmd_report(&bogus, ReportFormat::Csv, tmp.path()).is_err());
        assert!(cmd_report(&tmp.path().join("missing.json"), ReportFormat::Csv, tmp.path()).is_err());
    }
}
