//! One fuzzing campaign: a bounded run of an ensemble of backends against a
//! single target, sharing one seed corpus, with results unioned at the end.

mod external;
mod mock;
mod model;

pub use external::{default_grace, external_fuzz, ExternalBackendConfig, ExternalContext};
pub use mock::mock_fuzz;
pub use model::{BugModel, MockModel, ModelError};

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusInput};
use crate::digest::derive_seed;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign duration must be > 0")]
    ZeroDuration,
    #[error("campaign needs at least one backend")]
    NoBackends,
    #[error("sanitizer slowdown factor must be >= 1, got {0}")]
    BadSlowdownFactor(f64),
    #[error("backend {backend}: {detail}")]
    Backend { backend: String, detail: String },
    #[error("external backends need a work area and a target binary")]
    MissingWorkArea,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A scheduled fuzzing job for one target at one commit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub target_name: String,
    pub commit_id: String,
    pub duration_s: f64,
    pub backends: Vec<String>,
    /// Opaque reference to the seed corpus (directory or label).
    pub seed_corpus: String,
    pub rng_seed: u64,
    pub sanitizers_enabled: bool,
}

/// First observation times of one bug's events, virtual seconds from
/// campaign start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTimes {
    pub reached: Option<f64>,
    pub triggered: Option<f64>,
    pub detected: Option<f64>,
}

/// What a single backend produced.
#[derive(Debug, Clone)]
pub struct BackendRun {
    pub backend: String,
    pub reached: BTreeSet<String>,
    pub triggered: BTreeSet<String>,
    pub detected: BTreeSet<String>,
    pub event_times: BTreeMap<String, EventTimes>,
    pub new_inputs: Vec<CorpusInput>,
    pub cpu_seconds: f64,
    pub warnings: Vec<String>,
}

impl BackendRun {
    pub fn new(backend: &str) -> Self {
        BackendRun {
            backend: backend.to_string(),
            reached: BTreeSet::new(),
            triggered: BTreeSet::new(),
            detected: BTreeSet::new(),
            event_times: BTreeMap::new(),
            new_inputs: Vec::new(),
            cpu_seconds: 0.0,
            warnings: Vec::new(),
        }
    }
}

/// Union of all backend runs for one campaign.
#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub spec: CampaignSpec,
    pub reached: BTreeSet<String>,
    pub triggered: BTreeSet<String>,
    pub detected: BTreeSet<String>,
    pub first_event_times: BTreeMap<String, EventTimes>,
    pub new_inputs: Vec<CorpusInput>,
    pub cpu_seconds_used: f64,
    pub backend_errors: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl CampaignResult {
    fn empty(spec: CampaignSpec) -> Self {
        CampaignResult {
            spec,
            reached: BTreeSet::new(),
            triggered: BTreeSet::new(),
            detected: BTreeSet::new(),
            first_event_times: BTreeMap::new(),
            new_inputs: Vec::new(),
            cpu_seconds_used: 0.0,
            backend_errors: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// detected ⊆ triggered ⊆ reached, with ordered event times.
    pub fn subset_invariant_holds(&self) -> bool {
        if !self.detected.is_subset(&self.triggered) || !self.triggered.is_subset(&self.reached) {
            return false;
        }
        self.first_event_times.values().all(|t| {
            let ord = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => x <= y,
                _ => true,
            };
            ord(t.reached, t.triggered)
                && ord(t.triggered, t.detected)
                && [t.reached, t.triggered, t.detected]
                    .into_iter()
                    .flatten()
                    .all(|v| v <= self.spec.duration_s)
        })
    }

    fn absorb(&mut self, run: BackendRun) {
        self.reached.extend(run.reached);
        self.triggered.extend(run.triggered);
        self.detected.extend(run.detected);
        for (bug, times) in run.event_times {
            let slot = self.first_event_times.entry(bug).or_default();
            let min = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
            slot.reached = min(slot.reached, times.reached);
            slot.triggered = min(slot.triggered, times.triggered);
            slot.detected = min(slot.detected, times.detected);
        }
        let known: BTreeSet<_> = self.new_inputs.iter().map(|i| i.content_hash).collect();
        for input in run.new_inputs {
            if !known.contains(&input.content_hash) {
                self.new_inputs.push(input);
            }
        }
        self.cpu_seconds_used += run.cpu_seconds;
        self.warnings.extend(run.warnings);
    }
}

/// Apply the sanitizer slowdown to a rate: enabled -> rate / factor.
pub fn apply_sanitizer_slowdown(
    rate: f64,
    enabled: bool,
    factor: f64,
) -> Result<f64, CampaignError> {
    if factor < 1.0 {
        return Err(CampaignError::BadSlowdownFactor(factor));
    }
    Ok(if enabled { rate / factor } else { rate })
}

#[derive(Debug, Clone)]
pub enum BackendKind {
    Mock(Arc<MockModel>),
    External(ExternalBackendConfig),
}

#[derive(Debug, Clone)]
pub struct Backend {
    pub name: String,
    pub kind: BackendKind,
}

/// Filesystem context for campaigns that spawn external backends; mock-only
/// ensembles don't need one.
#[derive(Debug, Clone, Default)]
pub struct CampaignEnv {
    pub work_root: Option<PathBuf>,
    pub target_path: Option<PathBuf>,
}

/// Run every backend against the same seed corpus for the spec's duration
/// and union the results.
///
/// The corpus merge itself happens exactly once, at campaign end, by the
/// caller (the returned `new_inputs` are what to merge). A crashing backend
/// aborts only itself; its error lands in `backend_errors`.
pub fn run_campaign(
    spec: &CampaignSpec,
    seed_corpus: &Corpus,
    backends: &[Backend],
    env: &CampaignEnv,
) -> Result<CampaignResult, CampaignError> {
    if spec.duration_s <= 0.0 {
        return Err(CampaignError::ZeroDuration);
    }
    if backends.is_empty() {
        return Err(CampaignError::NoBackends);
    }
    let mut result = CampaignResult::empty(spec.clone());

    // External backends share a read-only seed corpus directory.
    let corpus_in = if backends.iter().any(|b| matches!(b.kind, BackendKind::External(_))) {
        let (Some(root), Some(_)) = (&env.work_root, &env.target_path) else {
            return Err(CampaignError::MissingWorkArea);
        };
        let dir = root.join("corpus_in");
        std::fs::create_dir_all(&dir)?;
        for input in seed_corpus.iter() {
            let path = dir.join(input.content_hash.to_hex());
            if !path.exists() {
                std::fs::write(&path, &input.bytes)?;
            }
        }
        Some(dir)
    } else {
        None
    };

    // Mock backends are pure and instant; external ones run concurrently on
    // their own threads. Results merge in declared backend order either way.
    let mut runs: Vec<Option<Result<BackendRun, CampaignError>>> =
        (0..backends.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, backend) in backends.iter().enumerate() {
            let seed = derive_seed(spec.rng_seed, &format!("backend/{i}/{}", backend.name));
            match &backend.kind {
                BackendKind::Mock(model) => {
                    let run = mock_fuzz(
                        model,
                        spec.duration_s,
                        seed_corpus,
                        seed,
                        spec.sanitizers_enabled,
                        &backend.name,
                    );
                    runs[i] = Some(Ok(run));
                }
                BackendKind::External(cfg) => {
                    let ctx = ExternalContext {
                        target_path: env.target_path.clone().unwrap_or_default(),
                        corpus_in: corpus_in.clone().unwrap_or_default(),
                        corpus_out: env
                            .work_root
                            .as_ref()
                            .unwrap()
                            .join(format!("out-{i}-{}", backend.name)),
                        artifacts: env
                            .work_root
                            .as_ref()
                            .unwrap()
                            .join(format!("artifacts-{i}-{}", backend.name)),
                        duration_s: spec.duration_s,
                        seed,
                        grace_s: default_grace(spec.duration_s),
                    };
                    let cfg = cfg.clone();
                    handles.push((i, scope.spawn(move || external_fuzz(&cfg, &ctx))));
                }
            }
        }
        for (i, handle) in handles {
            runs[i] = Some(handle.join().unwrap_or_else(|_| {
                Err(CampaignError::Backend {
                    backend: backends[i].name.clone(),
                    detail: "backend thread panicked".into(),
                })
            }));
        }
    });

    for (i, slot) in runs.into_iter().enumerate() {
        match slot.expect("every backend produced a slot") {
            Ok(run) => result.absorb(run),
            Err(e) => result
                .backend_errors
                .push((backends[i].name.clone(), e.to_string())),
        }
    }
    debug_assert!(result.subset_invariant_holds());
    Ok(result)
}
