//! Aggregation of campaign and selection outcomes into report files.
//!
//! All JSON reports carry `schema_version`; maps are ordered so emission is
//! byte-stable for a fixed input.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selection::SelectionStats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing sweep cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("duplicate sweep cell: {0}")]
    DuplicateCell(String),
    #[error("no results to aggregate")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Result of one trial: a chain of simulated commits at one duration, with
/// bug sets unioned over the whole chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialChainResult {
    pub library: String,
    pub duration_s: u64,
    pub trial: u32,
    pub reached: BTreeSet<String>,
    pub triggered: BTreeSet<String>,
    pub detected: BTreeSet<String>,
}

/// Per-(library, duration) aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub duration_s: u64,
    pub trials: u32,
    pub mean_reached: f64,
    pub stderr_reached: f64,
    pub mean_triggered: f64,
    pub stderr_triggered: f64,
    pub mean_detected: f64,
    pub stderr_detected: f64,
}

/// Campaign duration versus effectiveness, the paper's reporting shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSweepReport {
    pub schema_version: u32,
    pub durations_s: Vec<u64>,
    pub per_library: BTreeMap<String, Vec<SweepCell>>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregate trial-chain results into the duration sweep report.
///
/// Every (library, duration, trial) cell for `trials` trials must be present
/// exactly once; anything missing is an error naming the holes.
pub fn aggregate_sweep(
    results: &[TrialChainResult],
    trials: u32,
) -> Result<DurationSweepReport, ReportError> {
    if results.is_empty() || trials == 0 {
        return Err(ReportError::Empty);
    }
    let libraries: BTreeSet<&str> = results.iter().map(|r| r.library.as_str()).collect();
    let durations: BTreeSet<u64> = results.iter().map(|r| r.duration_s).collect();
    let mut cells: BTreeMap<(&str, u64, u32), &TrialChainResult> = BTreeMap::new();
    for r in results {
        let key = (r.library.as_str(), r.duration_s, r.trial);
        if cells.insert(key, r).is_some() {
            return Err(ReportError::DuplicateCell(format!(
                "{}/{}s/trial{}",
                r.library, r.duration_s, r.trial
            )));
        }
    }
    let mut missing = Vec::new();
    for lib in &libraries {
        for d in &durations {
            for t in 0..trials {
                if !cells.contains_key(&(lib, *d, t)) {
                    missing.push(format!("{lib}/{d}s/trial{t}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(ReportError::MissingCells(missing));
    }

    let durations_s: Vec<u64> = durations.iter().copied().collect();
    let mut per_library = BTreeMap::new();
    for lib in &libraries {
        let mut row = Vec::with_capacity(durations_s.len());
        for d in &durations_s {
            let counts = |f: fn(&TrialChainResult) -> usize| -> Vec<f64> {
                (0..trials)
                    .map(|t| f(cells[&(*lib, *d, t)]) as f64)
                    .collect()
            };
            let (mean_reached, stderr_reached) = mean_and_stderr(&counts(|r| r.reached.len()));
            let (mean_triggered, stderr_triggered) =
                mean_and_stderr(&counts(|r| r.triggered.len()));
            let (mean_detected, stderr_detected) = mean_and_stderr(&counts(|r| r.detected.len()));
            row.push(SweepCell {
                duration_s: *d,
                trials,
                mean_reached,
                stderr_reached,
                mean_triggered,
                stderr_triggered,
                mean_detected,
                stderr_detected,
            });
        }
        per_library.insert(lib.to_string(), row);
    }
    Ok(DurationSweepReport {
        schema_version: SCHEMA_VERSION,
        durations_s,
        per_library,
    })
}

/// Resource savings implied by selection statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsSummary {
    pub schema_version: u32,
    pub campaigns_total: u64,
    pub campaigns_skipped: u64,
    /// Fraction of target-campaigns avoided (= identical fraction over
    /// commit x target pairs).
    pub fraction_saved: f64,
    pub ensemble_size: u32,
    pub duration_assumption_s: u64,
    pub core_hours_saved: f64,
}

/// Turn identical-target statistics into saved campaigns and core-hours
/// under a per-campaign duration assumption.
pub fn savings_summary(
    stats: &SelectionStats,
    ensemble_size: u32,
    duration_assumption_s: u64,
) -> SavingsSummary {
    let mut total = 0u64;
    let mut skipped = 0.0f64;
    for lib in &stats.per_library {
        let pairs = lib.commits_processed * lib.harnesses.max(1);
        total += pairs;
        skipped += pairs as f64 * lib.identical_fraction;
    }
    let fraction_saved = if total == 0 { 0.0 } else { skipped / total as f64 };
    SavingsSummary {
        schema_version: SCHEMA_VERSION,
        campaigns_total: total,
        campaigns_skipped: skipped.round() as u64,
        fraction_saved,
        ensemble_size,
        duration_assumption_s,
        core_hours_saved: skipped * ensemble_size as f64 * duration_assumption_s as f64 / 3600.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    /// One CSV per metric with columns (library, duration_s, mean, stderr),
    /// ready for external plotting.
    PlotData,
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Emit a duration sweep report. Returns the files written.
pub fn emit_sweep(
    report: &DurationSweepReport,
    format: ReportFormat,
    out_dir: &Path,
    basename: &str,
) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        ReportFormat::Json => {
            let path = out_dir.join(format!("{basename}.json"));
            write_text(&path, &format!("{}\n", serde_json::to_string_pretty(report)?))?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = out_dir.join(format!("{basename}.csv"));
            let mut text = String::from(
                "library,duration_s,trials,mean_reached,stderr_reached,mean_triggered,stderr_triggered,mean_detected,stderr_detected\n",
            );
            for (lib, cells) in &report.per_library {
                for c in cells {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        csv_escape(lib),
                        c.duration_s,
                        c.trials,
                        c.mean_reached,
                        c.stderr_reached,
                        c.mean_triggered,
                        c.stderr_triggered,
                        c.mean_detected,
                        c.stderr_detected
                    ));
                }
            }
            write_text(&path, &text)?;
            Ok(vec![path])
        }
        ReportFormat::PlotData => {
            type Extract = fn(&SweepCell) -> (f64, f64);
            let metrics: [(&str, Extract); 3] = [
                ("reached", |c| (c.mean_reached, c.stderr_reached)),
                ("triggered", |c| (c.mean_triggered, c.stderr_triggered)),
                ("detected", |c| (c.mean_detected, c.stderr_detected)),
            ];
            let mut paths = Vec::new();
            for (metric, extract) in metrics {
                let path = out_dir.join(format!("{basename}_{metric}.csv"));
                let mut text = String::from("library,duration_s,mean,stderr\n");
                for (lib, cells) in &report.per_library {
                    for c in cells {
                        let (mean, stderr) = extract(c);
                        text.push_str(&format!(
                            "{},{},{},{}\n",
                            csv_escape(lib),
                            c.duration_s,
                            mean,
                            stderr
                        ));
                    }
                }
                write_text(&path, &text)?;
                paths.push(path);
            }
            Ok(paths)
        }
    }
}

/// Emit selection statistics (Table-2 shape).
pub fn emit_selection_stats(
    stats: &SelectionStats,
    format: ReportFormat,
    out_dir: &Path,
    basename: &str,
) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        ReportFormat::Json => {
            let path = out_dir.join(format!("{basename}.json"));
            write_text(&path, &format!("{}\n", serde_json::to_string_pretty(stats)?))?;
            Ok(vec![path])
        }
        ReportFormat::Csv | ReportFormat::PlotData => {
            let path = out_dir.join(format!("{basename}.csv"));
            let mut text =
                String::from("library,commits_processed,harnesses,identical_fraction\n");
            for lib in &stats.per_library {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_escape(&lib.name),
                    lib.commits_processed,
                    lib.harnesses,
                    lib.identical_fraction
                ));
            }
            text.push_str(&format!("weighted_mean,,,{}\n", stats.weighted_mean));
            write_text(&path, &text)?;
            Ok(vec![path])
        }
    }
}

/// Emit a savings summary.
pub fn emit_savings(
    summary: &SavingsSummary,
    format: ReportFormat,
    out_dir: &Path,
    basename: &str,
) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        ReportFormat::Json => {
            let path = out_dir.join(format!("{basename}.json"));
            write_text(&path, &format!("{}\n", serde_json::to_string_pretty(summary)?))?;
            Ok(vec![path])
        }
        ReportFormat::Csv | ReportFormat::PlotData => {
            let path = out_dir.join(format!("{basename}.csv"));
            let text = format!(
                "campaigns_total,campaigns_skipped,fraction_saved,ensemble_size,duration_assumption_s,core_hours_saved\n{},{},{},{},{},{}\n",
                summary.campaigns_total,
                summary.campaigns_skipped,
                summary.fraction_saved,
                summary.ensemble_size,
                summary.duration_assumption_s,
                summary.core_hours_saved
            );
            write_text(&path, &text)?;
            Ok(vec![path])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::stats_from_rows;

    fn trial(lib: &str, d: u64, t: u32, r: &[&str], tr: &[&str], det: &[&str]) -> TrialChainResult {
        TrialChainResult {
            library: lib.into(),
            duration_s: d,
            trial: t,
            reached: r.iter().map(|s| s.to_string()).collect(),
            triggered: tr.iter().map(|s| s.to_string()).collect(),
            detected: det.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn single_trial_means_equal_counts() {
        let results = vec![trial("lib", 900, 0, &["a", "b"], &["a"], &["a"])];
        let rep = aggregate_sweep(&results, 1).unwrap();
        let cell = &rep.per_library["lib"][0];
        assert_eq!(cell.mean_reached, 2.0);
        assert_eq!(cell.mean_triggered, 1.0);
        assert_eq!(cell.mean_detected, 1.0);
        assert_eq!(cell.stderr_detected, 0.0);
    }

    #[test]
    fn zero_bug_library_is_all_zero() {
        let results: Vec<TrialChainResult> = (0..3)
            .flat_map(|t| {
                [300u64, 900].map(|d| trial("lua-like", d, t, &[], &[], &[]))
            })
            .collect();
        let rep = aggregate_sweep(&results, 3).unwrap();
        for cell in &rep.per_library["lua-like"] {
            assert_eq!(cell.mean_reached, 0.0);
            assert_eq!(cell.mean_triggered, 0.0);
            assert_eq!(cell.mean_detected, 0.0);
        }
    }

    #[test]
    fn missing_cells_are_reported() {
        let results = vec![
            trial("lib", 900, 0, &["a"], &[], &[]),
            trial("lib", 1800, 0, &["a"], &[], &[]),
            trial("lib", 900, 1, &["a"], &[], &[]),
            // (lib, 1800, 1) missing
        ];
        let err = aggregate_sweep(&results, 2).unwrap_err();
        match err {
            ReportError::MissingCells(cells) => {
                assert_eq!(cells, vec!["lib/1800s/trial1"]);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut results: Vec<TrialChainResult> = (0..4)
            .map(|t| trial("lib", 900, t, &["a", "b"], &["a"], if t % 2 == 0 { &["a"] } else { &[] }))
            .collect();
        let forward = aggregate_sweep(&results, 4).unwrap();
        results.reverse();
        let backward = aggregate_sweep(&results, 4).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn ordering_invariant_holds_cellwise() {
        let results: Vec<TrialChainResult> = (0..5)
            .map(|t| trial("lib", 900, t, &["a", "b", "c"], &["a", "b"], &["a"]))
            .collect();
        let rep = aggregate_sweep(&results, 5).unwrap();
        for cells in rep.per_library.values() {
            for c in cells {
                assert!(c.mean_detected <= c.mean_triggered);
                assert!(c.mean_triggered <= c.mean_reached);
            }
        }
    }

    #[test]
    fn savings_php_like() {
        let stats = stats_from_rows(&[("php", 7821, 9, 0.64)]);
        let s = savings_summary(&stats, 3, 900);
        assert!((s.fraction_saved - 0.64).abs() < 1e-9);
        assert_eq!(s.campaigns_total, 7821 * 9);
    }

    #[test]
    fn savings_zero_identical() {
        let stats = stats_from_rows(&[("lib", 100, 2, 0.0)]);
        let s = savings_summary(&stats, 3, 900);
        assert_eq!(s.campaigns_skipped, 0);
        assert_eq!(s.core_hours_saved, 0.0);
    }

    #[test]
    fn savings_core_hours_arithmetic() {
        // 100 skipped target-campaigns x 3 cores x 0.25 h = 75 core-hours.
        let stats = stats_from_rows(&[("lib", 100, 1, 1.0)]);
        let s = savings_summary(&stats, 3, 900);
        assert_eq!(s.campaigns_skipped, 100);
        assert!((s.core_hours_saved - 75.0).abs() < 1e-9);
    }

    #[test]
    fn emit_json_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let results = vec![trial("lib", 900, 0, &["a"], &["a"], &[])];
        let rep = aggregate_sweep(&results, 1).unwrap();
        let paths = emit_sweep(&rep, ReportFormat::Json, tmp.path(), "sweep").unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let back: DurationSweepReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn emit_csv_row_count_is_grid_size() {
        let tmp = tempfile::tempdir().unwrap();
        let mut results = Vec::new();
        for lib in ["a", "b", "c"] {
            for d in [300u64, 900, 1800] {
                results.push(trial(lib, d, 0, &[], &[], &[]));
            }
        }
        let rep = aggregate_sweep(&results, 1).unwrap();
        let paths = emit_sweep(&rep, ReportFormat::Csv, tmp.path(), "sweep").unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
    }

    #[test]
    fn unwritable_output_path_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("not-a-dir");
        std::fs::write(&blocker, b"file").unwrap();
        let results = vec![trial("lib", 900, 0, &[], &[], &[])];
        let rep = aggregate_sweep(&results, 1).unwrap();
        let out = blocker.join("nested");
        assert!(emit_sweep(&rep, ReportFormat::Json, &out, "sweep").is_err());
    }

    #[test]
    fn plot_data_emits_one_file_per_metric() {
        let tmp = tempfile::tempdir().unwrap();
        let results = vec![trial("lib", 900, 0, &["a"], &["a"], &["a"])];
        let rep = aggregate_sweep(&results, 1).unwrap();
        let paths = emit_sweep(&rep, ReportFormat::PlotData, tmp.path(), "fig3").unwrap();
        assert_eq!(paths.len(), 3);
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["fig3_reached.csv", "fig3_triggered.csv", "fig3_detected.csv"]);
        for p in &paths {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.starts_with("library,duration_s,mean,stderr\n"));
        }
    }
}
