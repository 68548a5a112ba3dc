//! Per-target corpora: the unit of sharing between commits and between
//! ensemble peers.
//!
//! On disk a corpus is a directory per target: one file per input named by
//! its lowercase hex content hash, plus a sidecar `index` file caching
//! coverage signatures (`<hex hash> <space-separated decimal edge ids>` per
//! line). That layout is interoperable with real fuzzers' corpus-directory
//! convention.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot merge corpus for target {other} into corpus for target {ours}")]
    CrossTargetMerge { ours: String, other: String },
    #[error("corpus directory {0} failed integrity check: {1}")]
    Integrity(PathBuf, String),
    #[error("unparsable coverage data: {0}")]
    BadCoverage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The set of coverage edges an input exercises. Empty is allowed (the input
/// exercised nothing measurable).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageSignature {
    pub edges: BTreeSet<u32>,
}

impl CoverageSignature {
    pub fn new(edges: impl IntoIterator<Item = u32>) -> Self {
        CoverageSignature {
            edges: edges.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        CoverageSignature::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputOrigin {
    Seed,
    Fuzzer(String),
    Merge,
}

/// One saved test input. Two inputs with equal content hashes are the same
/// input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusInput {
    pub content_hash: Digest,
    pub bytes: Vec<u8>,
    pub signature: CoverageSignature,
    pub origin: InputOrigin,
    pub found_at: f64,
}

impl CorpusInput {
    pub fn new(
        bytes: Vec<u8>,
        signature: CoverageSignature,
        origin: InputOrigin,
        found_at: f64,
    ) -> Self {
        CorpusInput {
            content_hash: Digest::of(&bytes),
            bytes,
            signature,
            origin,
            found_at,
        }
    }

    pub fn seed(bytes: Vec<u8>, signature: CoverageSignature) -> Self {
        CorpusInput::new(bytes, signature, InputOrigin::Seed, 0.0)
    }
}

/// A deduplicated set of inputs for one target, keyed by content hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub target_name: String,
    inputs: BTreeMap<Digest, CorpusInput>,
}

impl Corpus {
    pub fn new(target_name: &str) -> Self {
        Corpus {
            target_name: target_name.to_string(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn contains(&self, hash: &Digest) -> bool {
        self.inputs.contains_key(hash)
    }

    /// Inputs in content-hash order.
    pub fn iter(&self) -> impl Iterator<Item = &CorpusInput> {
        self.inputs.values()
    }

    /// Insert one input; an existing input with the same hash wins.
    pub fn insert(&mut self, input: CorpusInput) {
        self.inputs.entry(input.content_hash).or_insert(input);
    }

    /// Union of all input signatures.
    pub fn edge_union(&self) -> BTreeSet<u32> {
        let mut all = BTreeSet::new();
        for i in self.inputs.values() {
            all.extend(&i.signature.edges);
        }
        all
    }

    /// Merge additional inputs (set union; existing inputs never dropped).
    pub fn merge_inputs(&mut self, additions: impl IntoIterator<Item = CorpusInput>) {
        for a in additions {
            self.insert(a);
        }
    }

    /// Merge another corpus for the same target.
    pub fn merge_from(&mut self, other: &Corpus) -> Result<(), CorpusError> {
        if other.target_name != self.target_name {
            return Err(CorpusError::CrossTargetMerge {
                ours: self.target_name.clone(),
                other: other.target_name.clone(),
            });
        }
        self.merge_inputs(other.iter().cloned());
        Ok(())
    }

    /// Greedy set-cover minimization.
    ///
    /// Repeatedly keeps the input covering the most not-yet-covered edges
    /// (ties broken by smallest content hash) until the full edge union is
    /// covered. Deterministic; preserves the edge union exactly; inputs
    /// contributing no new edges are dropped.
    pub fn minimize(&self) -> Corpus {
        let mut kept = Corpus::new(&self.target_name);
        let goal = self.edge_union();
        let mut covered: BTreeSet<u32> = BTreeSet::new();
        let mut remaining: Vec<&CorpusInput> = self.inputs.values().collect();
        while covered.len() < goal.len() {
            let mut best: Option<(usize, usize)> = None; // (gain, index)
            for (idx, input) in remaining.iter().enumerate() {
                let gain = input.signature.edges.difference(&covered).count();
                let better = match best {
                    None => gain > 0,
                    Some((best_gain, _)) => gain > best_gain,
                };
                if better {
                    best = Some((gain, idx));
                }
            }
            let Some((_, idx)) = best else { break };
            let chosen = remaining.remove(idx);
            covered.extend(&chosen.signature.edges);
            kept.insert(chosen.clone());
        }
        kept
    }

    /// Persist to `dir/<target_name>/`: input files first, then the index
    /// written atomically (temp + rename), so a crash can never leave an
    /// index entry pointing at a missing input.
    pub fn save(&self, root: &Path) -> Result<PathBuf, CorpusError> {
        let dir = root.join(&self.target_name);
        std::fs::create_dir_all(&dir)?;
        for input in self.inputs.values() {
            let path = dir.join(input.content_hash.to_hex());
            if !path.exists() {
                std::fs::write(&path, &input.bytes)?;
            }
        }
        let mut index = String::new();
        for input in self.inputs.values() {
            index.push_str(&input.content_hash.to_hex());
            for e in &input.signature.edges {
                index.push(' ');
                index.push_str(&e.to_string());
            }
            index.push('\n');
        }
        let tmp = dir.join(".index.tmp");
        std::fs::write(&tmp, index)?;
        std::fs::rename(&tmp, dir.join("index"))?;
        Ok(dir)
    }

    /// Load a corpus saved by [`Corpus::save`]. Loaded inputs become seeds.
    /// A missing directory yields an empty corpus.
    pub fn load(target_name: &str, root: &Path) -> Result<Corpus, CorpusError> {
        let dir = root.join(target_name);
        let mut corpus = Corpus::new(target_name);
        let index_path = dir.join("index");
        if !index_path.exists() {
            return Ok(corpus);
        }
        let text = std::fs::read_to_string(&index_path)?;
        for line in text.lines() {
            let mut cols = line.split_whitespace();
            let Some(hash_hex) = cols.next() else { continue };
            let hash = Digest::from_hex(hash_hex)
                .map_err(|e| CorpusError::Integrity(dir.clone(), format!("bad hash: {e}")))?;
            let edges: Result<BTreeSet<u32>, _> = cols.map(str::parse).collect();
            let edges = edges
                .map_err(|e| CorpusError::Integrity(dir.clone(), format!("bad edge id: {e}")))?;
            let bytes = std::fs::read(dir.join(hash_hex)).map_err(|e| {
                CorpusError::Integrity(dir.clone(), format!("missing input {hash_hex}: {e}"))
            })?;
            if Digest::of(&bytes) != hash {
                return Err(CorpusError::Integrity(
                    dir.clone(),
                    format!("content of {hash_hex} does not match its name"),
                ));
            }
            corpus.insert(CorpusInput {
                content_hash: hash,
                bytes,
                signature: CoverageSignature { edges },
                origin: InputOrigin::Seed,
                found_at: 0.0,
            });
        }
        Ok(corpus)
    }

    /// Integrity check for a persisted corpus directory: every index entry's
    /// input file exists and hashes to its name.
    pub fn verify_dir(target_name: &str, root: &Path) -> Result<usize, CorpusError> {
        Corpus::load(target_name, root).map(|c| c.len())
    }
}

/// Something that can attribute coverage to raw input bytes: the mock target
/// model, or an index parsed from fuzzer-produced coverage data.
pub trait CoverageOracle {
    fn signature_of(&self, bytes: &[u8]) -> Result<CoverageSignature, CorpusError>;
}

/// Deterministic coverage signature of an input under the given target
/// handle.
pub fn signature_of(
    bytes: &[u8],
    oracle: &dyn CoverageOracle,
) -> Result<CoverageSignature, CorpusError> {
    oracle.signature_of(bytes)
}
