//! Continuous-fuzzing pipeline orchestration.
//!
//! fuzzmill decides, for every commit in a stream, *which* fuzz targets to
//! fuzz (normalized binary fingerprints), *how* to fuzz them (an ensemble of
//! backends sharing and minimizing a per-target corpus between commits), and
//! *for how long* (a priority-driven duration ladder). A deterministic
//! stochastic mock backend lets the whole pipeline run on a virtual clock, so
//! duration/effectiveness trade-offs can be explored in milliseconds instead
//! of CPU-years.
//!
//! Module map:
//!
//! - [`commit`] — commit stream ingestion (git repositories or a seeded
//!   synthetic generator).
//! - [`fingerprint`] — target builds, byte normalization (scrub rules), and
//!   content digests that drive the fuzz/skip decision.
//! - [`selection`] — fuzz/skip policy plus resource-savings statistics.
//! - [`corpus`] — per-target corpora: merge, greedy set-cover minimization,
//!   and the on-disk layout shared with real fuzzers.
//! - [`campaign`] — one bounded fuzzing campaign over an ensemble of
//!   backends; includes the mock simulator and the external process adapter.
//! - [`scheduler`] — commit backlog, queue policies, priority rules, core
//!   budget packing, and snapshot (nightly) jobs.
//! - [`report`] — aggregation into duration-sweep and savings reports.
//! - [`pipeline`] / [`simulate`] — the end-to-end loops behind the CLI.

pub mod campaign;
pub mod cli;
pub mod commit;
pub mod config;
pub mod corpus;
pub mod digest;
pub mod fingerprint;
pub mod pipeline;
mod procutil;
pub mod report;
pub mod scheduler;
pub mod selection;
pub mod simulate;

pub use digest::Digest;
