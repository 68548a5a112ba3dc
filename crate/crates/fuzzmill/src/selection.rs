//! Fuzz/skip decisions and resource-savings statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{ChangeSet, ChangeStatus};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("cannot accumulate statistics from an empty decision stream")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetDecision {
    Fuzz,
    Skip,
    Error,
}

/// Per-target fuzz/skip outcome for one commit, with the rule that fired.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub commit_id: String,
    pub per_target: BTreeMap<String, TargetDecision>,
    pub reason: BTreeMap<String, String>,
}

impl SelectionDecision {
    pub fn count(&self, d: TargetDecision) -> usize {
        self.per_target.values().filter(|&&v| v == d).count()
    }

    fn identical_skips(&self) -> usize {
        self.reason.values().filter(|r| r.as_str() == "identical").count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    /// Run the campaign despite the build failure (with the last good
    /// artifact); never lose coverage to a build quirk.
    FuzzAnyway,
    /// Skip the target and surface the failure.
    SkipAndFlag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub skip_identical: bool,
    pub error_policy: ErrorPolicy,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            skip_identical: true,
            error_policy: ErrorPolicy::FuzzAnyway,
        }
    }
}

/// Turn a changeset into per-target decisions.
///
/// With `skip_identical` off, every present target is fuzzed regardless of
/// its status. Targets that no longer exist (`removed`) get no decision;
/// there is nothing left to fuzz.
pub fn decide(changeset: &ChangeSet, policy: &SelectionPolicy) -> SelectionDecision {
    let mut per_target = BTreeMap::new();
    let mut reason = BTreeMap::new();
    for (name, status) in &changeset.per_target {
        if *status == ChangeStatus::Removed {
            continue;
        }
        let (decision, why) = if !policy.skip_identical {
            (TargetDecision::Fuzz, "selection-disabled")
        } else {
            match status {
                ChangeStatus::Identical => (TargetDecision::Skip, "identical"),
                ChangeStatus::Changed => (TargetDecision::Fuzz, "changed"),
                ChangeStatus::New => (TargetDecision::Fuzz, "new"),
                ChangeStatus::Unbuildable => match policy.error_policy {
                    ErrorPolicy::FuzzAnyway => (TargetDecision::Fuzz, "unbuildable-fuzz-anyway"),
                    ErrorPolicy::SkipAndFlag => (TargetDecision::Error, "unbuildable"),
                },
                ChangeStatus::Removed => unreachable!(),
            }
        };
        per_target.insert(name.clone(), decision);
        reason.insert(name.clone(), why.to_string());
    }
    SelectionDecision {
        commit_id: changeset.commit_id.clone(),
        per_target,
        reason,
    }
}

/// One library's aggregate, in the shape the paper reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibraryStats {
    pub name: String,
    pub commits_processed: u64,
    pub harnesses: u64,
    /// Fraction of (commit, target) pairs whose fingerprint was identical.
    pub identical_fraction: f64,
}

/// Accumulated identical-target proportions plus the commit-weighted mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionStats {
    pub per_library: Vec<LibraryStats>,
    /// Weighted mean of `identical_fraction`, weighted by commits processed.
    pub weighted_mean: f64,
    /// Histogram of per-commit identical fractions: decile bin (0..=10,
    /// bin = round(fraction * 10)) -> commit count.
    pub per_commit_distribution: BTreeMap<u8, u64>,
}

fn weighted_mean(rows: &[LibraryStats]) -> f64 {
    let total: u64 = rows.iter().map(|r| r.commits_processed).sum();
    if total == 0 {
        return 0.0;
    }
    rows.iter()
        .map(|r| r.commits_processed as f64 * r.identical_fraction)
        .sum::<f64>()
        / total as f64
}

/// Build stats from already-aggregated per-library rows
/// (name, commits processed, harnesses, identical fraction).
pub fn stats_from_rows(rows: &[(&str, u64, u64, f64)]) -> SelectionStats {
    let per_library: Vec<LibraryStats> = rows
        .iter()
        .map(|(name, commits, harnesses, frac)| LibraryStats {
            name: name.to_string(),
            commits_processed: *commits,
            harnesses: *harnesses,
            identical_fraction: *frac,
        })
        .collect();
    SelectionStats {
        weighted_mean: weighted_mean(&per_library),
        per_library,
        per_commit_distribution: BTreeMap::new(),
    }
}

fn distribution_bin(fraction: f64) -> u8 {
    (fraction * 10.0).round().clamp(0.0, 10.0) as u8
}

/// Fold a stream of labeled decisions into per-library statistics.
///
/// Fractions count (commit, target) pairs; the weighted mean weights each
/// library by its commit count. Permutation-invariant over the stream.
pub fn accumulate<'a, I>(decisions: I) -> Result<SelectionStats, SelectionError>
where
    I: IntoIterator<Item = (&'a str, &'a SelectionDecision)>,
{
    struct Acc {
        commits: u64,
        pairs: u64,
        identical: u64,
        harnesses: u64,
    }
    let mut by_library: BTreeMap<String, Acc> = BTreeMap::new();
    let mut distribution: BTreeMap<u8, u64> = BTreeMap::new();
    let mut any = false;
    for (library, decision) in decisions {
        any = true;
        let acc = by_library.entry(library.to_string()).or_insert(Acc {
            commits: 0,
            pairs: 0,
            identical: 0,
            harnesses: 0,
        });
        let pairs = decision.per_target.len() as u64;
        let identical = decision.identical_skips() as u64;
        acc.commits += 1;
        acc.pairs += pairs;
        acc.identical += identical;
        acc.harnesses = acc.harnesses.max(pairs);
        if pairs > 0 {
            let frac = identical as f64 / pairs as f64;
            *distribution.entry(distribution_bin(frac)).or_insert(0) += 1;
        }
    }
    if !any {
        return Err(SelectionError::EmptyStream);
    }
    let per_library: Vec<LibraryStats> = by_library
        .into_iter()
        .map(|(name, acc)| LibraryStats {
            name,
            commits_processed: acc.commits,
            harnesses: acc.harnesses,
            identical_fraction: if acc.pairs == 0 {
                0.0
            } else {
                acc.identical as f64 / acc.pairs as f64
            },
        })
        .collect();
    Ok(SelectionStats {
        weighted_mean: weighted_mean(&per_library),
        per_library,
        per_commit_distribution: distribution,
    })
}

/// Cores freed by skipping: each skipped target-campaign releases one
/// ensemble worth of cores.
pub fn cores_saved(decision: &SelectionDecision, ensemble_size: u32) -> u32 {
    decision.count(TargetDecision::Skip) as u32 * ensemble_size
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn changeset(entries: &[(&str, ChangeStatus)]) -> ChangeSet {
        ChangeSet {
            commit_id: "c1".into(),
            per_target: entries
                .iter()
                .map(|(n, s)| (n.to_string(), *s))
                .collect(),
        }
    }

    #[test]
    fn all_identical_all_skip() {
        let cs = changeset(&[
            ("a", ChangeStatus::Identical),
            ("b", ChangeStatus::Identical),
        ]);
        let d = decide(&cs, &SelectionPolicy::default());
        assert_eq!(d.count(TargetDecision::Skip), 2);
        assert_eq!(d.count(TargetDecision::Fuzz), 0);
    }

    #[test]
    fn selection_disabled_fuzzes_everything() {
        let cs = changeset(&[
            ("a", ChangeStatus::Identical),
            ("b", ChangeStatus::Changed),
            ("c", ChangeStatus::Unbuildable),
        ]);
        let policy = SelectionPolicy {
            skip_identical: false,
            error_policy: ErrorPolicy::SkipAndFlag,
        };
        let d = decide(&cs, &policy);
        assert_eq!(d.count(TargetDecision::Fuzz), 3);
        assert_eq!(d.count(TargetDecision::Skip), 0);
    }

    #[test]
    fn one_of_twelve_changed() {
        let mut entries = vec![("t00", ChangeStatus::Changed)];
        let names: Vec<String> = (1..12).map(|i| format!("t{i:02}")).collect();
        for n in &names {
            entries.push((n.as_str(), ChangeStatus::Identical));
        }
        let d = decide(&changeset(&entries), &SelectionPolicy::default());
        assert_eq!(d.count(TargetDecision::Fuzz), 1);
        assert_eq!(d.count(TargetDecision::Skip), 11);
    }

    #[test]
    fn error_policy_governs_unbuildable() {
        let cs = changeset(&[("a", ChangeStatus::Unbuildable)]);
        let fuzzy = decide(&cs, &SelectionPolicy::default());
        assert_eq!(fuzzy.per_target["a"], TargetDecision::Fuzz);
        let flag = decide(
            &cs,
            &SelectionPolicy {
                skip_identical: true,
                error_policy: ErrorPolicy::SkipAndFlag,
            },
        );
        assert_eq!(flag.per_target["a"], TargetDecision::Error);
        assert_eq!(flag.reason["a"], "unbuildable");
    }

    #[test]
    fn table2_rows_reproduce_the_weighted_mean() {
        let stats = stats_from_rows(&[
            ("libsndfile", 241, 1, 0.64),
            ("libtiff", 801, 2, 0.53),
            ("libpng", 1158, 1, 0.41),
            ("lua", 2285, 1, 0.20),
            ("poppler", 1919, 2, 0.44),
            ("openssl", 7847, 12, 0.63),
            ("php", 7821, 9, 0.64),
        ]);
        // Hand computation gives ~0.557.
        assert!((stats.weighted_mean - 0.55).abs() <= 0.01, "{}", stats.weighted_mean);
        assert!((stats.weighted_mean - 0.5574).abs() < 0.001);
    }

    #[test]
    fn equal_weights_average_fractions() {
        let stats = stats_from_rows(&[("a", 100, 1, 0.2), ("b", 100, 1, 0.6)]);
        assert!((stats.weighted_mean - 0.4).abs() < 1e-12);
    }

    #[test]
    fn accumulate_all_skips_is_fraction_one() {
        let cs = changeset(&[("a", ChangeStatus::Identical)]);
        let d = decide(&cs, &SelectionPolicy::default());
        let stats = accumulate(vec![("lib", &d), ("lib", &d)]).unwrap();
        assert_eq!(stats.per_library.len(), 1);
        assert_eq!(stats.per_library[0].commits_processed, 2);
        assert!((stats.per_library[0].identical_fraction - 1.0).abs() < 1e-12);
        assert!((stats.weighted_mean - 1.0).abs() < 1e-12);
        assert_eq!(stats.per_commit_distribution[&10], 2);
    }

    #[test]
    fn table2_replay_fixture_yields_41_percent() {
        // A libpng-like single-target stream engineered so the compiled
        // target is identical at 41 of 100 steps, run through the real
        // compare -> decide -> accumulate path.
        use crate::fingerprint::{compare, fingerprint, FingerprintSet, ScrubRules, TargetArtifact};
        let rules = ScrubRules::empty();
        let fp_of = |content: &str, commit: &str| {
            let mut set = FingerprintSet::new();
            set.insert(
                fingerprint(
                    &TargetArtifact::built("libpng_read_fuzzer", commit, content.into()),
                    &rules,
                )
                .unwrap(),
            );
            set
        };
        let mut version = 0u32;
        let mut previous = fp_of("target v0", "c0");
        let mut decisions = Vec::new();
        for step in 0..100 {
            // 41 steps leave the target untouched, 59 change it.
            if !(step % 100 < 41) {
                version += 1;
            }
            let current = fp_of(&format!("target v{version}"), &format!("c{}", step + 1));
            let changeset = compare(&format!("c{}", step + 1), &current, &previous);
            decisions.push(decide(&changeset, &SelectionPolicy::default()));
            previous = current;
        }
        let stats = accumulate(decisions.iter().map(|d| ("libpng", d))).unwrap();
        assert_eq!(stats.per_library[0].commits_processed, 100);
        assert!((stats.per_library[0].identical_fraction - 0.41).abs() < 1e-9);
    }

    #[test]
    fn accumulate_empty_stream_errors() {
        let empty: Vec<(&str, &SelectionDecision)> = Vec::new();
        assert!(matches!(accumulate(empty), Err(SelectionError::EmptyStream)));
    }

    #[test]
    fn cores_saved_scales_with_ensemble() {
        let cs = changeset(&[
            ("a", ChangeStatus::Identical),
            ("b", ChangeStatus::Identical),
            ("c", ChangeStatus::Changed),
        ]);
        let d = decide(&cs, &SelectionPolicy::default());
        assert_eq!(cores_saved(&d, 3), 6);
    }

    fn arb_status() -> impl Strategy<Value = ChangeStatus> {
        prop_oneof![
            Just(ChangeStatus::Identical),
            Just(ChangeStatus::Changed),
            Just(ChangeStatus::New),
            Just(ChangeStatus::Unbuildable),
        ]
    }

    proptest! {
        #[test]
        fn selection_off_never_skips(
            statuses in proptest::collection::vec(arb_status(), 1..8)
        ) {
            let entries: Vec<(String, ChangeStatus)> = statuses
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("t{i}"), *s))
                .collect();
            let cs = ChangeSet {
                commit_id: "c".into(),
                per_target: entries.into_iter().collect(),
            };
            let d = decide(&cs, &SelectionPolicy {
                skip_identical: false,
                error_policy: ErrorPolicy::SkipAndFlag,
            });
            prop_assert_eq!(d.count(TargetDecision::Skip), 0);
            prop_assert_eq!(d.count(TargetDecision::Fuzz), cs.per_target.len());
        }

        #[test]
        fn accumulate_is_permutation_invariant(
            n in 2usize..12,
            seedish in any::<u64>(),
        ) {
            let mut decisions = Vec::new();
            for i in 0..n {
                let status = if (seedish >> i) & 1 == 0 {
                    ChangeStatus::Identical
                } else {
                    ChangeStatus::Changed
                };
                let cs = ChangeSet {
                    commit_id: format!("c{i}"),
                    per_target: [("t".to_string(), status)].into_iter().collect(),
                };
                decisions.push(decide(&cs, &SelectionPolicy::default()));
            }
            let libs = ["alpha", "beta"];
            let labeled: Vec<(&str, &SelectionDecision)> = decisions
                .iter()
                .enumerate()
                .map(|(i, d)| (libs[i % 2], d))
                .collect();
            let mut reversed = labeled.clone();
            reversed.reverse();
            let a = accumulate(labeled).unwrap();
            let b = accumulate(reversed).unwrap();
            prop_assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        }
    }
}
