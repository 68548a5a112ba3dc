//! The global configuration file (TOML). Unknown keys are rejected; every
//! default is documented in the README schema section.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{Backend, BackendKind, ExternalBackendConfig, MockModel, ModelError};
use crate::commit::SynthSpec;
use crate::fingerprint::{ScrubRules, TargetBuildPlan};
use crate::scheduler::{DurationLadder, PriorityRules, QueueMode, QueuePolicy};
use crate::selection::{ErrorPolicy, SelectionPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("model file {path}: {source}")]
    Model { path: PathBuf, source: ModelError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    Repo,
    Synth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoStream {
    pub path: PathBuf,
    #[serde(default = "default_branch")]
    pub branch: String,
    /// Limit the stream to the most recent N commits.
    #[serde(default)]
    pub max_commits: Option<usize>,
}

fn default_branch() -> String {
    "HEAD".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub mode: StreamMode,
    #[serde(default)]
    pub repo: Option<RepoStream>,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

fn default_build_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    /// Working directory for checkouts and builds (repo mode).
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default = "default_build_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub targets: Vec<TargetBuildPlan>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            workdir: None,
            timeout_secs: default_build_timeout(),
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrubPattern {
    pub name: String,
    pub pattern: String,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrubConfig {
    /// Apply any rules at all; off means fingerprints hash raw bytes.
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Include the shipped default patterns (timestamps, 40-hex revisions,
    /// semantic versions).
    #[serde(default = "default_true")]
    pub defaults: bool,
    #[serde(default)]
    pub patterns: Vec<ScrubPattern>,
    /// ELF section names to zero out (e.g. ".note.gnu.build-id").
    #[serde(default)]
    pub strip_sections: Vec<String>,
}

impl Default for ScrubConfig {
    fn default() -> Self {
        ScrubConfig {
            enabled: true,
            defaults: true,
            patterns: Vec::new(),
            strip_sections: Vec::new(),
        }
    }
}

impl ScrubConfig {
    pub fn to_rules(&self) -> Result<ScrubRules, ConfigError> {
        if !self.enabled {
            return Ok(ScrubRules::empty());
        }
        let mut rules = if self.defaults {
            ScrubRules::defaults()
        } else {
            ScrubRules::empty()
        };
        for p in &self.patterns {
            rules
                .add_pattern(&p.name, &p.pattern)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        for s in &self.strip_sections {
            rules.add_strip_section(s);
        }
        Ok(rules)
    }
}

fn default_library() -> String {
    "library".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default = "default_true")]
    pub skip_identical: bool,
    #[serde(default = "default_error_policy")]
    pub error_policy: ErrorPolicy,
    /// Label used for grouping statistics.
    #[serde(default = "default_library")]
    pub library: String,
}

fn default_error_policy() -> ErrorPolicy {
    ErrorPolicy::FuzzAnyway
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            skip_identical: true,
            error_policy: ErrorPolicy::FuzzAnyway,
            library: default_library(),
        }
    }
}

impl SelectionConfig {
    pub fn to_policy(&self) -> SelectionPolicy {
        SelectionPolicy {
            skip_identical: self.skip_identical,
            error_policy: self.error_policy,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub name: String,
    /// "mock" or "external".
    pub kind: String,
    /// Mock backends: model file path (defaults to the first simulate model).
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// External backends: command template with {target}, {corpus_in},
    /// {corpus_out}, {artifacts}, {duration_s}, {seed}.
    #[serde(default)]
    pub command: Option<String>,
}

fn default_ensemble() -> u32 {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Cores (= backend processes) per target-campaign.
    #[serde(default = "default_ensemble")]
    pub ensemble_size: u32,
    #[serde(default = "default_true")]
    pub sanitizers: bool,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            ensemble_size: default_ensemble(),
            sanitizers: true,
            backends: Vec::new(),
        }
    }
}

fn default_core_budget() -> u32 {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    /// `daily@HH:MM` (UTC) or `every:<seconds>`.
    pub calendar: String,
    #[serde(default = "default_snapshot_duration")]
    pub duration_s: u64,
}

fn default_snapshot_duration() -> u64 {
    28800
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    #[serde(default = "default_queue_mode")]
    pub mode: QueueMode,
    #[serde(default = "default_true")]
    pub selective: bool,
    #[serde(default = "default_core_budget")]
    pub core_budget: u32,
    #[serde(default)]
    pub ladder: DurationLadder,
    #[serde(default)]
    pub priority: PriorityRules,
    #[serde(default)]
    pub snapshot: Option<SnapshotConfig>,
}

fn default_queue_mode() -> QueueMode {
    QueueMode::ProcessAll
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            mode: default_queue_mode(),
            selective: true,
            core_budget: default_core_budget(),
            ladder: DurationLadder::default(),
            priority: PriorityRules::default(),
            snapshot: None,
        }
    }
}

impl SchedulerConfig {
    pub fn queue_policy(&self) -> QueuePolicy {
        QueuePolicy {
            mode: self.mode,
            selective: self.selective,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateModel {
    pub name: String,
    pub path: PathBuf,
}

fn default_durations() -> Vec<u64> {
    // 5, 10, 15, 30, 60, 120, 240, 480 minutes.
    vec![300, 600, 900, 1800, 3600, 7200, 14400, 28800]
}

fn default_trials() -> u32 {
    10
}

fn default_commits_per_trial() -> u32 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_durations")]
    pub durations_s: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_commits_per_trial")]
    pub commits_per_trial: u32,
    #[serde(default)]
    pub models: Vec<SimulateModel>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            durations_s: default_durations(),
            trials: default_trials(),
            commits_per_trial: default_commits_per_trial(),
            models: Vec::new(),
        }
    }
}

fn default_formats() -> Vec<crate::report::ReportFormat> {
    vec![crate::report::ReportFormat::Json, crate::report::ReportFormat::Csv]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_formats")]
    pub formats: Vec<crate::report::ReportFormat>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            formats: default_formats(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("fuzzmill-out")
}

/// The whole configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub stream: StreamConfig,
    #[serde(default)]
    pub build: BuildConfig,
    #[serde(default)]
    pub scrub: ScrubConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub campaign: CampaignConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config: Config = toml::from_str(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        config.validate()?;
        Ok(config)
    }

    pub fn from_str_for_tests(text: &str, base: &Path) -> Result<Config, ConfigError> {
        let mut config: Config = toml::from_str(text)?;
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    /// Make relative paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.output_dir);
        if let Some(repo) = &mut self.stream.repo {
            resolve(&mut repo.path);
        }
        if let Some(w) = &mut self.build.workdir {
            resolve(w);
        }
        for b in &mut self.campaign.backends {
            if let Some(m) = &mut b.model {
                resolve(m);
            }
        }
        for m in &mut self.simulate.models {
            resolve(&mut m.path);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.stream.mode {
            StreamMode::Repo => {
                if self.stream.repo.is_none() {
                    return Err(ConfigError::Invalid(
                        "stream.mode = repo requires a [stream.repo] section".into(),
                    ));
                }
            }
            StreamMode::Synth => {
                if self.stream.synth.is_none() {
                    return Err(ConfigError::Invalid(
                        "stream.mode = synth requires a [stream.synth] section".into(),
                    ));
                }
            }
        }
        self.scheduler
            .ladder
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for b in &self.campaign.backends {
            match b.kind.as_str() {
                "mock" => {}
                "external" => {
                    if b.command.is_none() {
                        return Err(ConfigError::Invalid(format!(
                            "external backend {} needs a command",
                            b.name
                        )));
                    }
                }
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "backend {} has unknown kind {other:?} (expected mock or external)",
                        b.name
                    )));
                }
            }
        }
        if !self.campaign.backends.is_empty()
            && self.campaign.backends.len() as u32 != self.campaign.ensemble_size
        {
            return Err(ConfigError::Invalid(format!(
                "ensemble_size ({}) must match the number of backends ({})",
                self.campaign.ensemble_size,
                self.campaign.backends.len()
            )));
        }
        if self.scheduler.core_budget < self.campaign.ensemble_size {
            return Err(ConfigError::Invalid(format!(
                "core_budget ({}) is smaller than one ensemble ({})",
                self.scheduler.core_budget, self.campaign.ensemble_size
            )));
        }
        if let Some(s) = &self.scheduler.snapshot {
            crate::scheduler::SnapshotCalendar::parse(&s.calendar)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Resolve backend configs into runnable backends, loading mock models
    /// (deduplicated by path).
    pub fn resolve_backends(&self) -> Result<Vec<Backend>, ConfigError> {
        let mut model_cache: BTreeMap<PathBuf, Arc<MockModel>> = BTreeMap::new();
        let mut load = |path: &PathBuf| -> Result<Arc<MockModel>, ConfigError> {
            if let Some(m) = model_cache.get(path) {
                return Ok(Arc::clone(m));
            }
            let model = MockModel::load(path).map_err(|e| ConfigError::Model {
                path: path.clone(),
                source: e,
            })?;
            let arc = Arc::new(model);
            model_cache.insert(path.clone(), Arc::clone(&arc));
            Ok(arc)
        };
        let default_model_path = self.simulate.models.first().map(|m| m.path.clone());
        let mut out = Vec::new();
        for b in &self.campaign.backends {
            let kind = match b.kind.as_str() {
                "mock" => {
                    let path = b
                        .model
                        .clone()
                        .or_else(|| default_model_path.clone())
                        .ok_or_else(|| {
                            ConfigError::Invalid(format!(
                                "mock backend {} has no model and no [[simulate.models]] fallback",
                                b.name
                            ))
                        })?;
                    BackendKind::Mock(load(&path)?)
                }
                "external" => BackendKind::External(ExternalBackendConfig {
                    name: b.name.clone(),
                    command: b.command.clone().expect("validated"),
                }),
                _ => unreachable!("validated"),
            };
            out.push(Backend {
                name: b.name.clone(),
                kind,
            });
        }
        // No backends configured: a default all-mock ensemble over the first
        // simulate model.
        if out.is_empty() {
            let path = default_model_path.ok_or_else(|| {
                ConfigError::Invalid(
                    "no backends configured and no [[simulate.models]] to default to".into(),
                )
            })?;
            let model = load(&path)?;
            for i in 0..self.campaign.ensemble_size {
                out.push(Backend {
                    name: format!("mock-{i}"),
                    kind: BackendKind::Mock(Arc::clone(&model)),
                });
            }
        }
        Ok(out)
    }
}
