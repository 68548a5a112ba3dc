//! Append-only fingerprint cache.
//!
//! One record per line, tab-separated, UTF-8:
//! `commit_id <TAB> target_name <TAB> hex digest <TAB> ruleset hash`.
//! The header line pins the digest algorithm so caches produced under a
//! different algorithm never mix.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::digest::Digest;

use super::{FingerprintError, TargetFingerprint};

const HEADER_PREFIX: &str = "# fuzzmill-fingerprint-cache v1 digest=";
const DIGEST_ALGO: &str = "sha256";

pub struct FingerprintCache {
    path: PathBuf,
    entries: BTreeMap<(String, String), Digest>,
}

impl FingerprintCache {
    /// Open (or create) a cache file, loading existing records.
    pub fn open(path: &Path) -> Result<Self, FingerprintError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(std::fs::File::open(path)?);
            let mut lines = reader.lines();
            if let Some(header) = lines.next() {
                let header = header?;
                let algo = header.strip_prefix(HEADER_PREFIX).ok_or_else(|| {
                    FingerprintError::Cache(format!(
                        "unrecognized cache header in {}",
                        path.display()
                    ))
                })?;
                if algo != DIGEST_ALGO {
                    return Err(FingerprintError::Cache(format!(
                        "cache {} was produced with digest {algo}, expected {DIGEST_ALGO}",
                        path.display()
                    )));
                }
            }
            for line in lines {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let mut cols = line.split('\t');
                let (Some(commit), Some(target), Some(digest)) =
                    (cols.next(), cols.next(), cols.next())
                else {
                    return Err(FingerprintError::Cache(format!("malformed record: {line}")));
                };
                let digest = Digest::from_hex(digest)
                    .map_err(|e| FingerprintError::Cache(format!("bad digest: {e}")))?;
                entries.insert((commit.to_string(), target.to_string()), digest);
            }
        }
        Ok(FingerprintCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn lookup(&self, commit_id: &str, target: &str) -> Option<&Digest> {
        self.entries
            .get(&(commit_id.to_string(), target.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append one record (writing the header first if the file is new).
    pub fn append(
        &mut self,
        fp: &TargetFingerprint,
        ruleset_hash: &Digest,
    ) -> Result<(), FingerprintError> {
        let new_file = !self.path.exists();
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        if new_file {
            writeln!(f, "{HEADER_PREFIX}{DIGEST_ALGO}")?;
        }
        writeln!(
            f,
            "{}\t{}\t{}\t{}",
            fp.commit_id,
            fp.target_name,
            fp.digest.to_hex(),
            ruleset_hash.to_hex()
        )?;
        self.entries.insert(
            (fp.commit_id.clone(), fp.target_name.clone()),
            fp.digest,
        );
        Ok(())
    }
}
