//! Duration-sweep simulation harness.
//!
//! One trial simulates a chain of commits: every "commit" runs one ensemble
//! campaign of the given duration, with the corpus minimized before and the
//! findings merged after each campaign, exactly like the live pipeline.
//! Everything runs on the virtual clock, so an 8-hour point costs
//! milliseconds, and a fixed seed gives a byte-identical report.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::campaign::{run_campaign, Backend, BackendKind, CampaignEnv, CampaignSpec, MockModel};
use crate::corpus::{Corpus, CorpusInput, CoverageSignature};
use crate::digest::derive_seed;
use crate::pipeline::PipelineError;
use crate::report::{aggregate_sweep, DurationSweepReport, TrialChainResult};

#[derive(Debug, Clone)]
pub struct SimulatePlan {
    pub models: Vec<(String, Arc<MockModel>)>,
    pub durations_s: Vec<u64>,
    pub trials: u32,
    pub commits_per_trial: u32,
    pub ensemble_size: u32,
    pub sanitizers: bool,
    pub rng_seed: u64,
}

/// Union of bug sets over one simulated commit chain.
#[derive(Debug, Default, Clone)]
pub struct ChainOutcome {
    pub reached: BTreeSet<String>,
    pub triggered: BTreeSet<String>,
    pub detected: BTreeSet<String>,
}

fn seed_corpus(library: &str, model: &MockModel) -> Corpus {
    let mut c = Corpus::new(library);
    c.insert(CorpusInput::seed(
        Vec::new(),
        CoverageSignature {
            edges: model.root_edges(),
        },
    ));
    c
}

/// Simulate one chain of commits against one model.
///
/// With `carryover` disabled each commit starts from the initial seed corpus
/// instead of inheriting the previous commit's merged corpus (used to
/// quantify the benefit of corpus sharing).
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    library: &str,
    model: &Arc<MockModel>,
    duration_s: f64,
    commits: u32,
    ensemble_size: u32,
    sanitizers: bool,
    chain_seed: u64,
    carryover: bool,
) -> Result<ChainOutcome, PipelineError> {
    let backends: Vec<Backend> = (0..ensemble_size)
        .map(|i| Backend {
            name: format!("mock-{i}"),
            kind: BackendKind::Mock(Arc::clone(model)),
        })
        .collect();
    let env = CampaignEnv::default();
    let initial = seed_corpus(library, model);
    let mut corpus = initial.clone();
    let mut outcome = ChainOutcome::default();
    for commit_idx in 0..commits {
        let seed_for_commit = derive_seed(chain_seed, &format!("commit/{commit_idx}"));
        let spec = CampaignSpec {
            target_name: library.to_string(),
            commit_id: format!("sim-{commit_idx}"),
            duration_s,
            backends: backends.iter().map(|b| b.name.clone()).collect(),
            seed_corpus: library.to_string(),
            rng_seed: seed_for_commit,
            sanitizers_enabled: sanitizers,
        };
        let minimized = corpus.minimize();
        let result = run_campaign(&spec, &minimized, &backends, &env)?;
        outcome.reached.extend(result.reached.iter().cloned());
        outcome.triggered.extend(result.triggered.iter().cloned());
        outcome.detected.extend(result.detected.iter().cloned());
        corpus = if carryover {
            let mut merged = minimized;
            merged.merge_inputs(result.new_inputs);
            merged
        } else {
            initial.clone()
        };
    }
    Ok(outcome)
}

/// Run the full (model x duration x trial) grid.
pub fn run_sweep(plan: &SimulatePlan) -> Result<Vec<TrialChainResult>, PipelineError> {
    let mut results = Vec::new();
    for (library, model) in &plan.models {
        for &duration in &plan.durations_s {
            for trial in 0..plan.trials {
                let chain_seed = derive_seed(
                    plan.rng_seed,
                    &format!("sim/{library}/{duration}/{trial}"),
                );
                let outcome = run_chain(
                    library,
                    model,
                    duration as f64,
                    plan.commits_per_trial,
                    plan.ensemble_size,
                    plan.sanitizers,
                    chain_seed,
                    true,
                )?;
                results.push(TrialChainResult {
                    library: library.clone(),
                    duration_s: duration,
                    trial,
                    reached: outcome.reached,
                    triggered: outcome.triggered,
                    detected: outcome.detected,
                });
            }
        }
    }
    Ok(results)
}

/// Run the sweep and aggregate it into the report shape.
pub fn sweep_report(plan: &SimulatePlan) -> Result<DurationSweepReport, PipelineError> {
    let results = run_sweep(plan)?;
    Ok(aggregate_sweep(&results, plan.trials)?)
}
