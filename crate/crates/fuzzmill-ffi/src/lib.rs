//! C ABI for fuzzmill.
//!
//! Everything crosses the boundary as opaque handles plus status codes;
//! `fm_last_error_message` returns a human-readable detail for the most
//! recent failure on the calling thread. The header is generated into
//! `include/fuzzmill.h` at build time.
//!
//! Ownership rules: every `*_new` / `*_load` / `*_minimize` result must be
//! released with the matching `*_free`; strings returned by the library are
//! borrowed and valid until the next call on the same thread.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fuzzmill::campaign::{mock_fuzz, MockModel};
use fuzzmill::corpus::{Corpus, CorpusInput, CoverageSignature};
use fuzzmill::fingerprint::{normalize, ScrubRules};
use fuzzmill::Digest;

/// Result of any fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument failed validation (details via fm_last_error_message).
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    Utf8 = 3,
    /// Filesystem or I/O failure.
    Io = 4,
    /// Input could not be parsed (model file, corpus index).
    Parse = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(status: FmStatus, message: &str) -> FmStatus {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new("").unwrap();
    });
}

/// Detail message for the most recent failure on this thread. Borrowed;
/// valid until the next fuzzmill call on the same thread.
#[no_mangle]
pub extern "C" fn fm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fm_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

fn guard(f: impl FnOnce() -> FmStatus) -> FmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => set_error(FmStatus::Internal, "panic across FFI boundary"),
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, FmStatus> {
    if ptr.is_null() {
        return Err(set_error(FmStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(FmStatus::Utf8, "string argument is not UTF-8"))
}

// ---------------------------------------------------------------------------
// Scrub rules and fingerprints
// ---------------------------------------------------------------------------

/// Opaque normalization ruleset.
pub struct FmScrubRules {
    inner: ScrubRules,
}

/// New ruleset with the shipped defaults (timestamps, 40-hex revisions,
/// semantic versions).
#[no_mangle]
pub extern "C" fn fm_scrub_rules_default() -> *mut FmScrubRules {
    clear_error();
    Box::into_raw(Box::new(FmScrubRules {
        inner: ScrubRules::defaults(),
    }))
}

/// New empty ruleset (normalization is the identity).
#[no_mangle]
pub extern "C" fn fm_scrub_rules_empty() -> *mut FmScrubRules {
    clear_error();
    Box::into_raw(Box::new(FmScrubRules {
        inner: ScrubRules::empty(),
    }))
}

/// Add a named byte-regex pattern rule.
///
/// # Safety
/// `rules` must be a live handle; `name` and `pattern` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_scrub_rules_add_pattern(
    rules: *mut FmScrubRules,
    name: *const c_char,
    pattern: *const c_char,
) -> FmStatus {
    guard(|| {
        let Some(rules) = rules.as_mut() else {
            return set_error(FmStatus::NullArgument, "null rules handle");
        };
        let (name, pattern) = match (cstr(name), cstr(pattern)) {
            (Ok(n), Ok(p)) => (n, p),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        match rules.inner.add_pattern(name, pattern) {
            Ok(()) => {
                clear_error();
                FmStatus::Ok
            }
            Err(e) => set_error(FmStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Add a rule zeroing the contents of a named ELF section.
///
/// # Safety
/// `rules` must be a live handle; `section` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_scrub_rules_add_strip_section(
    rules: *mut FmScrubRules,
    section: *const c_char,
) -> FmStatus {
    guard(|| {
        let Some(rules) = rules.as_mut() else {
            return set_error(FmStatus::NullArgument, "null rules handle");
        };
        let section = match cstr(section) {
            Ok(s) => s,
            Err(e) => return e,
        };
        rules.inner.add_strip_section(section);
        clear_error();
        FmStatus::Ok
    })
}

/// Release a ruleset.
///
/// # Safety
/// `rules` must come from a fm_scrub_rules_* constructor (or be null).
#[no_mangle]
pub unsafe extern "C" fn fm_scrub_rules_free(rules: *mut FmScrubRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Normalize `len` bytes into `out` (same length: scrubbing is
/// length-preserving). `out` may alias `data`.
///
/// # Safety
/// `data` and `out` must both point to at least `len` readable/writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn fm_normalize(
    rules: *const FmScrubRules,
    data: *const u8,
    len: usize,
    out: *mut u8,
) -> FmStatus {
    guard(|| {
        let Some(rules) = rules.as_ref() else {
            return set_error(FmStatus::NullArgument, "null rules handle");
        };
        if (data.is_null() || out.is_null()) && len > 0 {
            return set_error(FmStatus::NullArgument, "null data pointer");
        }
        let input = std::slice::from_raw_parts(data, len);
        let normalized = normalize(input, &rules.inner);
        std::ptr::copy_nonoverlapping(normalized.as_ptr(), out, len);
        clear_error();
        FmStatus::Ok
    })
}

/// SHA-256 of the normalized bytes; `digest_out` receives 32 bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes and `digest_out` to 32
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fm_fingerprint(
    rules: *const FmScrubRules,
    data: *const u8,
    len: usize,
    digest_out: *mut u8,
) -> FmStatus {
    guard(|| {
        let Some(rules) = rules.as_ref() else {
            return set_error(FmStatus::NullArgument, "null rules handle");
        };
        if (data.is_null() && len > 0) || digest_out.is_null() {
            return set_error(FmStatus::NullArgument, "null data or digest pointer");
        }
        let input = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(data, len)
        };
        let digest = Digest::of(&normalize(input, &rules.inner));
        std::ptr::copy_nonoverlapping(digest.0.as_ptr(), digest_out, 32);
        clear_error();
        FmStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

/// Opaque per-target corpus.
pub struct FmCorpus {
    inner: Corpus,
}

/// New empty corpus for a target.
///
/// # Safety
/// `target_name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_new(target_name: *const c_char) -> *mut FmCorpus {
    let Ok(name) = cstr(target_name) else {
        return std::ptr::null_mut();
    };
    clear_error();
    Box::into_raw(Box::new(FmCorpus {
        inner: Corpus::new(name),
    }))
}

/// Add one input with its coverage edges. Duplicate content is deduplicated
/// (still Ok).
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `edges` to `n_edges` u32s.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_add_input(
    corpus: *mut FmCorpus,
    bytes: *const u8,
    len: usize,
    edges: *const u32,
    n_edges: usize,
) -> FmStatus {
    guard(|| {
        let Some(corpus) = corpus.as_mut() else {
            return set_error(FmStatus::NullArgument, "null corpus handle");
        };
        if (bytes.is_null() && len > 0) || (edges.is_null() && n_edges > 0) {
            return set_error(FmStatus::NullArgument, "null input data");
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(bytes, len).to_vec()
        };
        let edge_set: BTreeSet<u32> = if n_edges == 0 {
            BTreeSet::new()
        } else {
            std::slice::from_raw_parts(edges, n_edges)
                .iter()
                .copied()
                .collect()
        };
        corpus.inner.insert(CorpusInput::seed(
            data,
            CoverageSignature { edges: edge_set },
        ));
        clear_error();
        FmStatus::Ok
    })
}

/// Number of inputs.
///
/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_len(corpus: *const FmCorpus) -> usize {
    corpus.as_ref().map(|c| c.inner.len()).unwrap_or(0)
}

/// Number of distinct covered edges.
///
/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_edge_count(corpus: *const FmCorpus) -> usize {
    corpus
        .as_ref()
        .map(|c| c.inner.edge_union().len())
        .unwrap_or(0)
}

/// Greedy set-cover minimization; returns a new handle, the input is
/// untouched. Coverage is preserved exactly.
///
/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_minimize(corpus: *const FmCorpus) -> *mut FmCorpus {
    let Some(corpus) = corpus.as_ref() else {
        set_error(FmStatus::NullArgument, "null corpus handle");
        return std::ptr::null_mut();
    };
    clear_error();
    Box::into_raw(Box::new(FmCorpus {
        inner: corpus.inner.minimize(),
    }))
}

/// Persist to `<root>/<target>/` (input files plus a sidecar index).
///
/// # Safety
/// `corpus` must be a live handle; `root` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_save(
    corpus: *const FmCorpus,
    root: *const c_char,
) -> FmStatus {
    guard(|| {
        let Some(corpus) = corpus.as_ref() else {
            return set_error(FmStatus::NullArgument, "null corpus handle");
        };
        let root = match cstr(root) {
            Ok(r) => r,
            Err(e) => return e,
        };
        match corpus.inner.save(Path::new(root)) {
            Ok(_) => {
                clear_error();
                FmStatus::Ok
            }
            Err(e) => set_error(FmStatus::Io, &e.to_string()),
        }
    })
}

/// Load a previously saved corpus (missing directory yields an empty one).
///
/// # Safety
/// `target_name` and `root` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_load(
    target_name: *const c_char,
    root: *const c_char,
) -> *mut FmCorpus {
    let (Ok(name), Ok(root)) = (cstr(target_name), cstr(root)) else {
        return std::ptr::null_mut();
    };
    match Corpus::load(name, Path::new(root)) {
        Ok(inner) => {
            clear_error();
            Box::into_raw(Box::new(FmCorpus { inner }))
        }
        Err(e) => {
            set_error(FmStatus::Parse, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a corpus handle.
///
/// # Safety
/// `corpus` must come from a fm_corpus_* constructor (or be null).
#[no_mangle]
pub unsafe extern "C" fn fm_corpus_free(corpus: *mut FmCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

// ---------------------------------------------------------------------------
// Mock target model and campaigns
// ---------------------------------------------------------------------------

/// Opaque mock target model.
pub struct FmModel {
    inner: MockModel,
}

/// Parse a model from text (see the model file format in the README).
///
/// # Safety
/// `text` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_model_parse(text: *const c_char) -> *mut FmModel {
    let Ok(text) = cstr(text) else {
        return std::ptr::null_mut();
    };
    match MockModel::parse(text) {
        Ok(inner) => {
            clear_error();
            Box::into_raw(Box::new(FmModel { inner }))
        }
        Err(e) => {
            set_error(FmStatus::Parse, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Load a model file.
///
/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_model_load(path: *const c_char) -> *mut FmModel {
    let Ok(path) = cstr(path) else {
        return std::ptr::null_mut();
    };
    match MockModel::load(Path::new(path)) {
        Ok(inner) => {
            clear_error();
            Box::into_raw(Box::new(FmModel { inner }))
        }
        Err(e) => {
            set_error(FmStatus::Parse, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a model handle.
///
/// # Safety
/// `model` must come from fm_model_parse/fm_model_load (or be null).
#[no_mangle]
pub unsafe extern "C" fn fm_model_free(model: *mut FmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Aggregate outcome of one mock campaign.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FmCampaignCounts {
    pub reached: u32,
    pub triggered: u32,
    pub detected: u32,
    pub new_inputs: u32,
    pub cpu_seconds: f64,
}

/// Run one deterministic mock campaign.
///
/// `seed_corpus` may be null (start from nothing); when `merge_into` is
/// non-null, newly found inputs are merged into it so a caller can chain
/// campaigns commit-style.
///
/// # Safety
/// All handles must be live; `counts_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_mock_campaign(
    model: *const FmModel,
    duration_s: f64,
    rng_seed: u64,
    sanitizers_enabled: bool,
    seed_corpus: *const FmCorpus,
    merge_into: *mut FmCorpus,
    counts_out: *mut FmCampaignCounts,
) -> FmStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return set_error(FmStatus::NullArgument, "null model handle");
        };
        if counts_out.is_null() {
            return set_error(FmStatus::NullArgument, "null counts pointer");
        }
        if duration_s <= 0.0 || !duration_s.is_finite() {
            return set_error(FmStatus::InvalidArgument, "duration must be > 0");
        }
        let empty = Corpus::new("ffi");
        let seeds = seed_corpus.as_ref().map(|c| &c.inner).unwrap_or(&empty);
        let run = mock_fuzz(
            &model.inner,
            duration_s,
            seeds,
            rng_seed,
            sanitizers_enabled,
            "ffi-mock",
        );
        *counts_out = FmCampaignCounts {
            reached: run.reached.len() as u32,
            triggered: run.triggered.len() as u32,
            detected: run.detected.len() as u32,
            new_inputs: run.new_inputs.len() as u32,
            cpu_seconds: run.cpu_seconds,
        };
        if let Some(dest) = merge_into.as_mut() {
            dest.inner.merge_inputs(run.new_inputs);
        }
        clear_error();
        FmStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn version_is_nul_terminated_semver() {
        let v = unsafe { CStr::from_ptr(fm_version()) };
        assert!(v.to_str().unwrap().split('.').count() >= 3);
    }

    #[test]
    fn fingerprint_ignores_scrubbed_timestamps() {
        let rules = fm_scrub_rules_default();
        let a = b"bin 2024-01-02T03:04:05Z tail";
        let b = b"bin 2030-09-08T07:06:05Z tail";
        let mut da = [0u8; 32];
        let mut db = [0u8; 32];
        unsafe {
            assert_eq!(
                fm_fingerprint(rules, a.as_ptr(), a.len(), da.as_mut_ptr()),
                FmStatus::Ok
            );
            assert_eq!(
                fm_fingerprint(rules, b.as_ptr(), b.len(), db.as_mut_ptr()),
                FmStatus::Ok
            );
        }
        assert_eq!(da, db);
        let empty = fm_scrub_rules_empty();
        let mut raw = [0u8; 32];
        unsafe {
            fm_fingerprint(empty, a.as_ptr(), a.len(), raw.as_mut_ptr());
        }
        assert_ne!(da, raw);
        unsafe {
            fm_scrub_rules_free(rules);
            fm_scrub_rules_free(empty);
        }
    }

    #[test]
    fn normalize_is_length_preserving_and_in_place_safe() {
        let rules = fm_scrub_rules_default();
        let mut buf = b"v1.2.3 build".to_vec();
        unsafe {
            assert_eq!(
                fm_normalize(rules, buf.as_ptr(), buf.len(), buf.as_mut_ptr()),
                FmStatus::Ok
            );
            fm_scrub_rules_free(rules);
        }
        assert_eq!(buf.len(), 12);
        assert_eq!(&buf[6..], b" build");
        assert_eq!(&buf[..6], &[0u8; 6]);
    }

    #[test]
    fn bad_pattern_sets_error_message() {
        let rules = fm_scrub_rules_empty();
        let status = unsafe {
            fm_scrub_rules_add_pattern(rules, c("broken").as_ptr(), c("[unclosed").as_ptr())
        };
        assert_eq!(status, FmStatus::InvalidArgument);
        let msg = unsafe { CStr::from_ptr(fm_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("broken"));
        unsafe { fm_scrub_rules_free(rules) };
    }

    #[test]
    fn corpus_minimize_over_ffi() {
        let corpus = unsafe { fm_corpus_new(c("t").as_ptr()) };
        let add = |bytes: &[u8], edges: &[u32]| unsafe {
            assert_eq!(
                fm_corpus_add_input(
                    corpus,
                    bytes.as_ptr(),
                    bytes.len(),
                    edges.as_ptr(),
                    edges.len()
                ),
                FmStatus::Ok
            );
        };
        add(b"a", &[1, 2]);
        add(b"b", &[2]);
        add(b"c", &[3]);
        add(b"a", &[1, 2]); // duplicate content
        unsafe {
            assert_eq!(fm_corpus_len(corpus), 3);
            assert_eq!(fm_corpus_edge_count(corpus), 3);
            let min = fm_corpus_minimize(corpus);
            assert_eq!(fm_corpus_len(min), 2);
            assert_eq!(fm_corpus_edge_count(min), 3);
            fm_corpus_free(min);
            fm_corpus_free(corpus);
        }
    }

    #[test]
    fn corpus_save_load_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let root = c(tmp.path().to_str().unwrap());
        let corpus = unsafe { fm_corpus_new(c("t").as_ptr()) };
        unsafe {
            let edges = [5u32, 9];
            fm_corpus_add_input(corpus, b"x".as_ptr(), 1, edges.as_ptr(), 2);
            assert_eq!(fm_corpus_save(corpus, root.as_ptr()), FmStatus::Ok);
            let loaded = fm_corpus_load(c("t").as_ptr(), root.as_ptr());
            assert!(!loaded.is_null());
            assert_eq!(fm_corpus_len(loaded), 1);
            assert_eq!(fm_corpus_edge_count(loaded), 2);
            fm_corpus_free(loaded);
            fm_corpus_free(corpus);
        }
    }

    #[test]
    fn mock_campaign_chain_over_ffi() {
        let model = unsafe {
            fm_model_parse(
                c("edges 8 2\nrate 0.1 0.5\nB1 5 0.05 1.0 0\n").as_ptr(),
            )
        };
        assert!(!model.is_null());
        let corpus = unsafe { fm_corpus_new(c("t").as_ptr()) };
        // Seed with the empty input (root coverage).
        unsafe {
            fm_corpus_add_input(corpus, std::ptr::null(), 0, [0u32, 1].as_ptr(), 2);
        }
        let mut counts = FmCampaignCounts::default();
        let mut detected_total = 0;
        for seed in 0..20 {
            let status = unsafe {
                fm_mock_campaign(model, 500.0, seed, true, corpus, corpus, &mut counts)
            };
            assert_eq!(status, FmStatus::Ok);
            assert!(counts.detected <= counts.triggered);
            assert!(counts.triggered <= counts.reached);
            detected_total += counts.detected;
        }
        // Corpus grew through the chain and stays bounded by the edge space.
        unsafe {
            assert!(fm_corpus_len(corpus) > 1);
            assert!(fm_corpus_edge_count(corpus) <= 8);
            fm_corpus_free(corpus);
            fm_model_free(model);
        }
        assert!(detected_total > 0);
    }

    #[test]
    fn invalid_model_yields_null_and_parse_error() {
        let model = unsafe { fm_model_parse(c("edges 0 0\n").as_ptr()) };
        assert!(model.is_null());
        let msg = unsafe { CStr::from_ptr(fm_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn null_arguments_are_reported_not_crashed() {
        let mut counts = FmCampaignCounts::default();
        let status = unsafe {
            fm_mock_campaign(
                std::ptr::null(),
                1.0,
                0,
                true,
                std::ptr::null(),
                std::ptr::null_mut(),
                &mut counts,
            )
        };
        assert_eq!(status, FmStatus::NullArgument);
        let status = unsafe {
            fm_normalize(std::ptr::null(), std::ptr::null(), 0, std::ptr::null_mut())
        };
        assert_eq!(status, FmStatus::NullArgument);
    }

    #[test]
    fn generated_header_exposes_the_api() {
        let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/fuzzmill.h");
        let text = std::fs::read_to_string(header).expect("header generated at build time");
        for symbol in [
            "FUZZMILL_H",
            "fm_status",
            "fm_version",
            "fm_last_error_message",
            "fm_scrub_rules_default",
            "fm_normalize",
            "fm_fingerprint",
            "fm_corpus_new",
            "fm_corpus_minimize",
            "fm_model_load",
            "fm_mock_campaign",
            "fm_campaign_counts",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}
