#ifndef CAVE_H
#define CAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CaveStatus {
  CAVE_STATUS_OK = 0,
  CAVE_STATUS_NULL_ARGUMENT = 1,
  CAVE_STATUS_INVALID_UTF8 = 2,
  CAVE_STATUS_INVALID_JSON = 3,
  CAVE_STATUS_INVALID_INPUT = 4,
  CAVE_STATUS_SCORING = 5,
  CAVE_STATUS_IO = 6,
  CAVE_STATUS_PANIC = 7,
} CaveStatus;

/**
 * A mock scorer built from a JSON lookup table.
 */
typedef struct CaveScorer CaveScorer;

/**
 * A tokenized trajectory.
 */
typedef struct CaveTrajectory CaveTrajectory;

/**
 * Owned bytes handed to C.
 */
typedef struct CaveBuffer {
  uint8_t *data;
  size_t len;
} CaveBuffer;

typedef struct CaveInterval {
  double lo;
  double hi;
} CaveInterval;

typedef struct CaveMcNemar {
  uint64_t b;
  uint64_t c;
  double p_value;
  /**
   * 1 for the exact binomial test, 0 for corrected chi-square.
   */
  uint8_t exact;
} CaveMcNemar;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *cave_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cave_string_free(char *s);

/**
 * # Safety
 * `buf` must be null or point to a buffer filled by this library.
 */
void cave_buffer_free(struct CaveBuffer *buf);

/**
 * Builds a mock scorer from its JSON table.
 *
 * # Safety
 * `table_json` must be a valid C string; `out` must be writable.
 */
enum CaveStatus cave_scorer_from_json(const char *table_json, struct CaveScorer **out);

/**
 * # Safety
 * `scorer` must be null or a handle from [`cave_scorer_from_json`].
 */
void cave_scorer_free(struct CaveScorer *scorer);

/**
 * Parses and tokenizes one trajectory document.
 *
 * # Safety
 * `doc_json` must be a valid C string; `out` must be writable.
 */
enum CaveStatus cave_trajectory_from_json(const char *doc_json,
                                          uint32_t vocab_size,
                                          struct CaveTrajectory **out);

/**
 * # Safety
 * `t` must be null or a handle from [`cave_trajectory_from_json`].
 */
void cave_trajectory_free(struct CaveTrajectory *t);

/**
 * Number of rounds, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live trajectory handle.
 */
size_t cave_trajectory_rounds(const struct CaveTrajectory *t);

/**
 * Scores a trajectory and writes a JSON object with `steps`, `reward`,
 * `mask`, `state_values` and `diagnostics`.
 *
 * `perception` (evidence text) and `config_toml` may be null.
 *
 * # Safety
 * Handles must be live; string arguments null or valid C strings.
 */
enum CaveStatus cave_score_trajectory(const struct CaveTrajectory *trajectory,
                                      const struct CaveScorer *scorer,
                                      const char *perception,
                                      const char *config_toml,
                                      char **out_json);

/**
 * Group-relative advantages `(r - mean) / (std + delta)`.
 *
 * `sample_std` selects the `G - 1` denominator. `out_advantages` must hold
 * `len` values; `out_mean` and `out_std` may be null.
 *
 * # Safety
 * `rewards` and `out_advantages` must point to `len` doubles.
 */
enum CaveStatus cave_group_advantages(const double *rewards,
                                      size_t len,
                                      double delta,
                                      bool sample_std,
                                      double *out_advantages,
                                      double *out_mean,
                                      double *out_std);

/**
 * Normal-approximation interval in percent.
 *
 * # Safety
 * `out` must be writable.
 */
enum CaveStatus cave_normal_ci(uint64_t successes, uint64_t n, double z, struct CaveInterval *out);

/**
 * Wilson score interval as proportions.
 *
 * # Safety
 * `out` must be writable.
 */
enum CaveStatus cave_wilson_ci(uint64_t successes, uint64_t n, double z, struct CaveInterval *out);

/**
 * McNemar test on discordant counts; exact when `b + c <= exact_limit`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CaveStatus cave_mcnemar(uint64_t b, uint64_t c, uint64_t exact_limit, struct CaveMcNemar *out);

/**
 * Generates one benchmark sample at a preset difficulty level (0-2).
 *
 * Writes the sample record as JSON and, if `out_png` is non-null, the
 * encoded image. `sources_dir` is required for `rs` and ignored otherwise.
 *
 * # Safety
 * String arguments must be valid C strings (or null where allowed);
 * out-pointers must be writable.
 */
enum CaveStatus cave_generate_sample(const char *scenario,
                                     uint32_t level,
                                     uint64_t seed,
                                     size_t index,
                                     const char *sources_dir,
                                     char **out_json,
                                     struct CaveBuffer *out_png);

/**
 * Library version as a static string.
 */
const char *cave_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVE_H */
