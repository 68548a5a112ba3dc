//! The mock target model: simulation ground truth.
//!
//! The coverage space is `width` parallel chains of edges; edge `e` sits at
//! depth `e / width` and its parent is `e - width`. Discovery rates decay
//! geometrically with depth (`base_rate * decay^depth`), so pushing the
//! frontier one level deeper costs a constant factor more CPU time and
//! cumulative discovery cost grows exponentially.
//!
//! Model file format (line-oriented UTF-8, `#` comments):
//!
//! ```text
//! edges <n_edges> <width>
//! rate <base_rate> <decay>
//! slowdown <factor>
//! <bug_id> <reach_edge> <trigger_rate> <detect_prob> <sanitizer_required>
//! ```
//!
//! Any line whose first token is not a directive keyword is a bug row.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{CorpusError, CoverageOracle, CoverageSignature};
use crate::digest::Digest;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ground truth for one simulated bug.
#[derive(Debug, Clone, PartialEq)]
pub struct BugModel {
    pub bug_id: String,
    /// The bug is reachable once this edge is covered.
    pub reach_edge: u32,
    /// Trigger events per CPU-second once reached (exponential clock).
    pub trigger_rate: f64,
    /// Probability the trigger surfaces to the fuzzer, given detection is
    /// possible at all.
    pub detect_given_trigger: f64,
    /// When true, detection requires sanitizers to be enabled.
    pub sanitizer_required: bool,
}

/// A complete simulated fuzz target.
#[derive(Debug, Clone)]
pub struct MockModel {
    pub n_edges: u32,
    pub width: u32,
    pub base_rate: f64,
    pub decay: f64,
    /// Sanitizer slowdown factor (>= 1); divides every rate when sanitizers
    /// are enabled.
    pub slowdown_factor: f64,
    pub bugs: Vec<BugModel>,
}

impl Default for MockModel {
    fn default() -> Self {
        MockModel {
            n_edges: 16,
            width: 4,
            base_rate: 1.0,
            decay: 0.5,
            slowdown_factor: 1.0,
            bugs: Vec::new(),
        }
    }
}

const DIRECTIVES: &[&str] = &["edges", "rate", "slowdown"];

impl MockModel {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut model = MockModel::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |detail: String| ModelError::Parse {
                line: idx + 1,
                detail,
            };
            match toks[0] {
                "edges" => {
                    if toks.len() != 3 {
                        return Err(err("expected: edges <n_edges> <width>".into()));
                    }
                    model.n_edges = toks[1].parse().map_err(|e| err(format!("n_edges: {e}")))?;
                    model.width = toks[2].parse().map_err(|e| err(format!("width: {e}")))?;
                }
                "rate" => {
                    if toks.len() != 3 {
                        return Err(err("expected: rate <base_rate> <decay>".into()));
                    }
                    model.base_rate =
                        toks[1].parse().map_err(|e| err(format!("base_rate: {e}")))?;
                    model.decay = toks[2].parse().map_err(|e| err(format!("decay: {e}")))?;
                }
                "slowdown" => {
                    if toks.len() != 2 {
                        return Err(err("expected: slowdown <factor>".into()));
                    }
                    model.slowdown_factor =
                        toks[1].parse().map_err(|e| err(format!("factor: {e}")))?;
                }
                _ => {
                    // Bug row: bug_id reach_edge trigger_rate detect_prob sanitizer_required
                    if toks.len() != 5 {
                        return Err(err(format!(
                            "expected 5 bug fields, got {}",
                            toks.len()
                        )));
                    }
                    let sanitizer_required = match toks[4] {
                        "0" | "false" => false,
                        "1" | "true" => true,
                        other => return Err(err(format!("sanitizer_required: {other:?}"))),
                    };
                    model.bugs.push(BugModel {
                        bug_id: toks[0].to_string(),
                        reach_edge: toks[1]
                            .parse()
                            .map_err(|e| err(format!("reach_edge: {e}")))?,
                        trigger_rate: toks[2]
                            .parse()
                            .map_err(|e| err(format!("trigger_rate: {e}")))?,
                        detect_given_trigger: toks[3]
                            .parse()
                            .map_err(|e| err(format!("detect_prob: {e}")))?,
                        sanitizer_required,
                    });
                }
            }
        }
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        MockModel::parse(&text)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.n_edges == 0 || self.width == 0 {
            return Err(ModelError::Invalid("edges and width must be >= 1".into()));
        }
        if self.base_rate < 0.0 || !(0.0..=1.0).contains(&self.decay) || self.decay == 0.0 {
            return Err(ModelError::Invalid(
                "base_rate must be >= 0 and decay in (0, 1]".into(),
            ));
        }
        if self.slowdown_factor < 1.0 {
            return Err(ModelError::Invalid("slowdown factor must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for b in &self.bugs {
            if DIRECTIVES.contains(&b.bug_id.as_str()) {
                return Err(ModelError::Invalid(format!(
                    "bug id {:?} collides with a directive keyword",
                    b.bug_id
                )));
            }
            if !seen.insert(b.bug_id.clone()) {
                return Err(ModelError::Invalid(format!("duplicate bug id {}", b.bug_id)));
            }
            if b.reach_edge >= self.n_edges {
                return Err(ModelError::Invalid(format!(
                    "bug {} reach_edge {} out of range (n_edges {})",
                    b.bug_id, b.reach_edge, self.n_edges
                )));
            }
            if b.trigger_rate < 0.0 || !(0.0..=1.0).contains(&b.detect_given_trigger) {
                return Err(ModelError::Invalid(format!(
                    "bug {} has invalid rates",
                    b.bug_id
                )));
            }
        }
        Ok(())
    }

    pub fn depth(&self, edge: u32) -> u32 {
        edge / self.width
    }

    /// Column-ancestor chain from a root down to `edge` (inclusive).
    pub fn path_to(&self, edge: u32) -> BTreeSet<u32> {
        let mut path = BTreeSet::new();
        let mut e = edge;
        loop {
            path.insert(e);
            if e < self.width {
                break;
            }
            e -= self.width;
        }
        path
    }

    /// Edges covered by the empty input (depth 0).
    pub fn root_edges(&self) -> BTreeSet<u32> {
        (0..self.width.min(self.n_edges)).collect()
    }

    /// Un-slowed discovery rate of one edge.
    pub fn edge_rate(&self, edge: u32) -> f64 {
        self.base_rate * self.decay.powi(self.depth(edge) as i32)
    }

    /// An uncovered edge is discoverable when its column parent is covered
    /// (roots always are discoverable).
    pub fn discoverable(&self, edge: u32, covered: &BTreeSet<u32>) -> bool {
        edge < self.width || covered.contains(&(edge - self.width))
    }

    /// The canonical byte form of the synthetic input that covers `edge`.
    pub fn input_bytes_for_edge(edge: u32) -> Vec<u8> {
        format!("edge:{edge}").into_bytes()
    }
}

impl CoverageOracle for MockModel {
    /// Deterministic per (bytes, model shape): the empty input covers the
    /// root set; synthetic `edge:<id>` inputs cover their column path;
    /// arbitrary bytes hash to one root column.
    fn signature_of(&self, bytes: &[u8]) -> Result<CoverageSignature, CorpusError> {
        if bytes.is_empty() {
            return Ok(CoverageSignature {
                edges: self.root_edges(),
            });
        }
        if let Some(rest) = bytes.strip_prefix(b"edge:") {
            if let Ok(id) = std::str::from_utf8(rest)
                .map_err(|_| ())
                .and_then(|s| s.parse::<u32>().map_err(|_| ()))
            {
                if id < self.n_edges {
                    return Ok(CoverageSignature {
                        edges: self.path_to(id),
                    });
                }
            }
        }
        let h = Digest::of(bytes);
        let col = u32::from_le_bytes(h.0[..4].try_into().unwrap())
            % self.width.min(self.n_edges);
        Ok(CoverageSignature {
            edges: [col].into_iter().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::signature_of;

    const SAMPLE: &str = "\
# sample model
edges 12 3
rate 2.0 0.5
slowdown 2.0
AAA001 4 0.01 1.0 0
BBB002 11 0.001 0.5 1
";

    #[test]
    fn parses_directives_and_bug_rows() {
        let m = MockModel::parse(SAMPLE).unwrap();
        assert_eq!(m.n_edges, 12);
        assert_eq!(m.width, 3);
        assert_eq!(m.base_rate, 2.0);
        assert_eq!(m.decay, 0.5);
        assert_eq!(m.slowdown_factor, 2.0);
        assert_eq!(m.bugs.len(), 2);
        assert_eq!(m.bugs[0].bug_id, "AAA001");
        assert!(!m.bugs[0].sanitizer_required);
        assert!(m.bugs[1].sanitizer_required);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(MockModel::parse("edges 0 1").is_err());
        assert!(MockModel::parse("edges 4 2\nbug 9 0.1 1.0 0").is_err()); // edge out of range
        assert!(MockModel::parse("slowdown 0.5").is_err());
        assert!(MockModel::parse("rate 1.0 0.0").is_err());
        assert!(MockModel::parse("edges 4 2\nrate 9 0.1 1.0").is_err()); // 'rate' collision w/ arity
        assert!(MockModel::parse("x 1 0.1 1.0 maybe").is_err());
        assert!(MockModel::parse("dup 1 0.1 1.0 0\ndup 2 0.1 1.0 0").is_err());
    }

    #[test]
    fn depth_path_and_rates() {
        let m = MockModel {
            n_edges: 12,
            width: 3,
            base_rate: 2.0,
            decay: 0.5,
            ..MockModel::default()
        };
        assert_eq!(m.depth(0), 0);
        assert_eq!(m.depth(5), 1);
        assert_eq!(m.depth(11), 3);
        assert_eq!(m.path_to(7), [1, 4, 7].into_iter().collect());
        assert_eq!(m.edge_rate(1), 2.0);
        assert_eq!(m.edge_rate(4), 1.0);
        assert_eq!(m.edge_rate(10), 0.25);
        assert!(m.discoverable(2, &BTreeSet::new()));
        assert!(!m.discoverable(5, &BTreeSet::new()));
        assert!(m.discoverable(5, &[2].into_iter().collect()));
    }

    #[test]
    fn signature_of_empty_is_root_set() {
        let m = MockModel::parse(SAMPLE).unwrap();
        let sig = signature_of(b"", &m).unwrap();
        assert_eq!(sig.edges, m.root_edges());
        assert_eq!(sig.edges, [0, 1, 2].into_iter().collect());
    }

    #[test]
    fn signature_of_is_deterministic() {
        let m = MockModel::parse(SAMPLE).unwrap();
        let a = signature_of(b"whatever bytes", &m).unwrap();
        let b = signature_of(b"whatever bytes", &m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edges.len(), 1);
        assert!(*a.edges.iter().next().unwrap() < m.width);
    }

    #[test]
    fn edge_inputs_cover_their_path() {
        let m = MockModel::parse(SAMPLE).unwrap();
        let sig = signature_of(&MockModel::input_bytes_for_edge(10), &m).unwrap();
        assert_eq!(sig.edges, [1, 4, 7, 10].into_iter().collect());
    }
}
