#ifndef FUZZMILL_H
#define FUZZMILL_H

/* Generated by cbindgen. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of any fallible call.
 */
typedef enum fm_status {
  FM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FM_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument failed validation (details via fm_last_error_message).
   */
  FM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  FM_STATUS_UTF8 = 3,
  /**
   * Filesystem or I/O failure.
   */
  FM_STATUS_IO = 4,
  /**
   * Input could not be parsed (model file, corpus index).
   */
  FM_STATUS_PARSE = 5,
  /**
   * Unexpected internal failure.
   */
  FM_STATUS_INTERNAL = 6,
} fm_status;

/**
 * Opaque per-target corpus.
 */
typedef struct fm_corpus fm_corpus;

/**
 * Opaque mock target model.
 */
typedef struct fm_model fm_model;

/**
 * Opaque normalization ruleset.
 */
typedef struct fm_scrub_rules fm_scrub_rules;

/**
 * Aggregate outcome of one mock campaign.
 */
typedef struct fm_campaign_counts {
  uint32_t reached;
  uint32_t triggered;
  uint32_t detected;
  uint32_t new_inputs;
  double cpu_seconds;
} fm_campaign_counts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Detail message for the most recent failure on this thread. Borrowed;
 * valid until the next fuzzmill call on the same thread.
 */
const char *fm_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *fm_version(void);

/**
 * New ruleset with the shipped defaults (timestamps, 40-hex revisions,
 * semantic versions).
 */
struct fm_scrub_rules *fm_scrub_rules_default(void);

/**
 * New empty ruleset (normalization is the identity).
 */
struct fm_scrub_rules *fm_scrub_rules_empty(void);

/**
 * Add a named byte-regex pattern rule.
 *
 * # Safety
 * `rules` must be a live handle; `name` and `pattern` must be NUL-terminated.
 */
enum fm_status fm_scrub_rules_add_pattern(struct fm_scrub_rules *rules,
                                          const char *name,
                                          const char *pattern);

/**
 * Add a rule zeroing the contents of a named ELF section.
 *
 * # Safety
 * `rules` must be a live handle; `section` must be NUL-terminated.
 */
enum fm_status fm_scrub_rules_add_strip_section(struct fm_scrub_rules *rules, const char *section);

/**
 * Release a ruleset.
 *
 * # Safety
 * `rules` must come from a fm_scrub_rules_* constructor (or be null).
 */
void fm_scrub_rules_free(struct fm_scrub_rules *rules);

/**
 * Normalize `len` bytes into `out` (same length: scrubbing is
 * length-preserving). `out` may alias `data`.
 *
 * # Safety
 * `data` and `out` must both point to at least `len` readable/writable
 * bytes.
 */
enum fm_status fm_normalize(const struct fm_scrub_rules *rules,
                            const uint8_t *data,
                            size_t len,
                            uint8_t *out);

/**
 * SHA-256 of the normalized bytes; `digest_out` receives 32 bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `digest_out` to 32
 * writable bytes.
 */
enum fm_status fm_fingerprint(const struct fm_scrub_rules *rules,
                              const uint8_t *data,
                              size_t len,
                              uint8_t *digest_out);

/**
 * New empty corpus for a target.
 *
 * # Safety
 * `target_name` must be NUL-terminated.
 */
struct fm_corpus *fm_corpus_new(const char *target_name);

/**
 * Add one input with its coverage edges. Duplicate content is deduplicated
 * (still Ok).
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `edges` to `n_edges` u32s.
 */
enum fm_status fm_corpus_add_input(struct fm_corpus *corpus,
                                   const uint8_t *bytes,
                                   size_t len,
                                   const uint32_t *edges,
                                   size_t n_edges);

/**
 * Number of inputs.
 *
 * # Safety
 * `corpus` must be a live handle.
 */
size_t fm_corpus_len(const struct fm_corpus *corpus);

/**
 * Number of distinct covered edges.
 *
 * # Safety
 * `corpus` must be a live handle.
 */
size_t fm_corpus_edge_count(const struct fm_corpus *corpus);

/**
 * Greedy set-cover minimization; returns a new handle, the input is
 * untouched. Coverage is preserved exactly.
 *
 * # Safety
 * `corpus` must be a live handle.
 */
struct fm_corpus *fm_corpus_minimize(const struct fm_corpus *corpus);

/**
 * Persist to `<root>/<target>/` (input files plus a sidecar index).
 *
 * # Safety
 * `corpus` must be a live handle; `root` must be NUL-terminated.
 */
enum fm_status fm_corpus_save(const struct fm_corpus *corpus, const char *root);

/**
 * Load a previously saved corpus (missing directory yields an empty one).
 *
 * # Safety
 * `target_name` and `root` must be NUL-terminated.
 */
struct fm_corpus *fm_corpus_load(const char *target_name, const char *root);

/**
 * Release a corpus handle.
 *
 * # Safety
 * `corpus` must come from a fm_corpus_* constructor (or be null).
 */
void fm_corpus_free(struct fm_corpus *corpus);

/**
 * Parse a model from text (see the model file format in the README).
 *
 * # Safety
 * `text` must be NUL-terminated.
 */
struct fm_model *fm_model_parse(const char *text);

/**
 * Load a model file.
 *
 * # Safety
 * `path` must be NUL-terminated.
 */
struct fm_model *fm_model_load(const char *path);

/**
 * Release a model handle.
 *
 * # Safety
 * `model` must come from fm_model_parse/fm_model_load (or be null).
 */
void fm_model_free(struct fm_model *model);

/**
 * Run one deterministic mock campaign.
 *
 * `seed_corpus` may be null (start from nothing); when `merge_into` is
 * non-null, newly found inputs are merged into it so a caller can chain
 * campaigns commit-style.
 *
 * # Safety
 * All handles must be live; `counts_out` must be writable.
 */
enum fm_status fm_mock_campaign(const struct fm_model *model,
                                double duration_s,
                                uint64_t rng_seed,
                                bool sanitizers_enabled,
                                const struct fm_corpus *seed_corpus,
                                struct fm_corpus *merge_into,
                                struct fm_campaign_counts *counts_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUZZMILL_H */
