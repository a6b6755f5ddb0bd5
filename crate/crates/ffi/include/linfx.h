#ifndef LINFX_H
#define LINFX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. Values 1 to 4 match the CLI exit codes.
 */
typedef enum LxStatus {
  LX_STATUS_OK = 0,
  /**
   * Malformed input, failed validation or violated precondition.
   */
  LX_STATUS_INVALID = 1,
  /**
   * A resampling budget or solver iteration cap ran out.
   */
  LX_STATUS_EXHAUSTED = 2,
  /**
   * Blocks were found but no positive lower constant could be certified.
   */
  LX_STATUS_NO_CERTIFICATE = 3,
  /**
   * An internal consistency check failed.
   */
  LX_STATUS_INTERNAL = 4,
  /**
   * A required pointer argument was null.
   */
  LX_STATUS_NULL_POINTER = 5,
  /**
   * The library panicked; the handle arguments are left untouched.
   */
  LX_STATUS_PANIC = 6,
} LxStatus;

typedef struct LxInstance LxInstance;

typedef struct LxResult LxResult;

/**
 * Run settings. Obtain defaults from [`lx_config_default`].
 */
typedef struct LxConfig {
  double eta;
  double gamma_cut;
  double c;
  uint64_t seed;
  uint32_t budget;
  bool full_set_first;
  bool exact;
} LxConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Release with
 * [`lx_string_free`].
 */
char *lx_last_error_message(void);

/**
 * `{"stage", "kind", "reason", "witness"}` of the last failed call, or
 * null. Release with [`lx_string_free`].
 */
char *lx_last_error_json(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void lx_string_free(char *s);

struct LxConfig lx_config_default(void);

/**
 * Parses an instance file's contents.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LxStatus lx_instance_from_json(const char *json, struct LxInstance **out);

/**
 * Random frame meeting the Prop-1 hypotheses.
 *
 * # Safety
 * `out` must be writable.
 */
enum LxStatus lx_gen_prop1(size_t n,
                           size_t n_cols,
                           double gamma,
                           double density,
                           uint64_t seed,
                           struct LxInstance **out);

/**
 * Frame with `value` on the diagonal.
 *
 * # Safety
 * `out` must be writable.
 */
enum LxStatus lx_gen_diagonal(size_t n, size_t n_cols, double value, struct LxInstance **out);

/**
 * Serialized instance; release with [`lx_string_free`]. Null if `inst`
 * is null.
 *
 * # Safety
 * `inst` must be a live handle or null.
 */
char *lx_instance_to_json(const struct LxInstance *inst);

/**
 * # Safety
 * `inst` must come from this library or be null, and not be used after.
 */
void lx_instance_free(struct LxInstance *inst);

/**
 * Runs the pipeline. `config` may be null for defaults.
 *
 * # Safety
 * `inst` must be a live handle, `config` null or valid, `out` writable.
 */
enum LxStatus lx_run(const struct LxInstance *inst,
                     const struct LxConfig *config,
                     struct LxResult **out);

/**
 * Number of blocks, 0 for a null handle.
 *
 * # Safety
 * `res` must be a live handle or null.
 */
size_t lx_result_m(const struct LxResult *res);

/**
 * `U / L_cert`, NaN for a null handle.
 *
 * # Safety
 * `res` must be a live handle or null.
 */
double lx_result_distance(const struct LxResult *res);

/**
 * # Safety
 * `res` must be a live handle or null.
 */
double lx_result_upper(const struct LxResult *res);

/**
 * # Safety
 * `res` must be a live handle or null.
 */
double lx_result_lower_cert(const struct LxResult *res);

/**
 * Result JSON as written by the CLI; release with [`lx_string_free`].
 *
 * # Safety
 * `res` must be a live handle or null.
 */
char *lx_result_to_json(const struct LxResult *res);

/**
 * # Safety
 * `res` must come from this library or be null, and not be used after.
 */
void lx_result_free(struct LxResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINFX_H */
