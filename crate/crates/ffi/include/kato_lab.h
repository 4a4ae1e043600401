#ifndef KATO_LAB_H
#define KATO_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Layer the exponent schedule targets.
 */
typedef enum KatoLayerMode {
  /**
   * Layer of width proportional to `nu`.
   */
  KATO_LAYER_MODE_KATO = 0,
  /**
   * Thinner layer of width `nu^a`.
   */
  KATO_LAYER_MODE_SMOOTH = 1,
} KatoLayerMode;

/**
 * Status codes; the nonzero values match the command-line exit codes where
 * they overlap.
 */
typedef enum KatoStatus {
  KATO_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8, index out of range or a too-small buffer.
   */
  KATO_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Inadmissible exponents, ladder, grid or config text.
   */
  KATO_STATUS_CONFIG_ERROR = 2,
  /**
   * A computation or the file system failed.
   */
  KATO_STATUS_RUN_FAILURE = 3,
  /**
   * Outputs exist but an acceptance property fails.
   */
  KATO_STATUS_ACCEPTANCE_FAILURE = 4,
  /**
   * The library panicked; the handle involved should be discarded.
   */
  KATO_STATUS_PANIC = 5,
} KatoStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct KatoConfig KatoConfig;

/**
 * Opaque ladder report.
 */
typedef struct KatoReport KatoReport;

/**
 * One ladder rung. Quantities that do not apply are NaN.
 */
typedef struct KatoLadderRow {
  double nu;
  double kato_total;
  double global_total;
  double balance_residual;
  double term_i;
  double term_ii;
  double term_iii;
  /**
   * Difference to the next finer rung in `L^3(0,T; L^3)` away from the walls.
   */
  double l3_diff_to_next;
  double linf_l2_diff_to_next;
} KatoLadderRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * call into the library on the same thread.
 */
const char *kato_last_error(void);

/**
 * Library version as a static string.
 */
const char *kato_version(void);

/**
 * Frees a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void kato_string_free(char *s);

/**
 * Exponent schedule `beta_0 = 0 < ... < beta_N` for `alpha`.
 *
 * `a` is ignored in Kato mode. Writes up to `capacity` exponents to `betas`
 * and the full count to `len`; a too-small buffer returns
 * `InvalidArgument` with `len` still set, so callers can size and retry.
 *
 * # Safety
 * `betas` must hold `capacity` doubles (it may be null when `capacity` is 0);
 * `len` must be valid for writes.
 */
enum KatoStatus kato_beta_schedule(double alpha,
                                   enum KatoLayerMode mode,
                                   double a,
                                   double *betas,
                                   size_t capacity,
                                   size_t *len);

/**
 * Checks `1 < a < 3/(5 - 6 alpha)` and, when `p` is not NaN, `p > 6/(3 alpha - 1)`.
 */
enum KatoStatus kato_validate_smooth_mode(double alpha, double a, double p);

/**
 * Default configuration (five-rung ladder, shear-layer data).
 */
struct KatoConfig *kato_config_new(void);

/**
 * Parses a TOML configuration and checks that it resolves.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum KatoStatus kato_config_from_toml(const char *toml, struct KatoConfig **out);

/**
 * Serializes a configuration as TOML.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be valid for writes. Free the
 * result with [`kato_string_free`].
 */
enum KatoStatus kato_config_to_toml(const struct KatoConfig *cfg, char **out);

/**
 * Sets the output directory.
 *
 * # Safety
 * `cfg` must be a live handle and `dir` a NUL-terminated string.
 */
enum KatoStatus kato_config_set_output(struct KatoConfig *cfg, const char *dir);

/**
 * Sets the worker count (0 = all cores); the environment override still wins.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum KatoStatus kato_config_set_workers(struct KatoConfig *cfg, size_t workers);

/**
 * Keep finished runs found in the output directory.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum KatoStatus kato_config_set_resume(struct KatoConfig *cfg, bool resume);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void kato_config_free(struct KatoConfig *cfg);

/**
 * Runs (or resumes) the ladder described by `cfg`.
 *
 * The report is written to `out` whenever the ladder finished, including
 * when a run failed (`RunFailure`) or a property does not hold
 * (`AcceptanceFailure`).
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be valid for writes.
 */
enum KatoStatus kato_run_ladder(const struct KatoConfig *cfg, struct KatoReport **out);

/**
 * Finishes an experiment directory using its stored configuration.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum KatoStatus kato_resume(const char *dir, struct KatoReport **out);

/**
 * Re-verifies stored outputs. `violations` receives the number of
 * inconsistencies found; `AcceptanceFailure` is returned when there are any
 * or when a stored property fails.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `violations` may be null.
 */
enum KatoStatus kato_check(const char *dir, size_t *violations);

/**
 * Number of ladder rungs; 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t kato_report_len(const struct KatoReport *report);

/**
 * Copies rung `index` (ordered from the largest viscosity) into `row`.
 *
 * # Safety
 * `report` must be a live handle; `row` must be valid for writes.
 */
enum KatoStatus kato_report_row(const struct KatoReport *report,
                                size_t index,
                                struct KatoLadderRow *row);

/**
 * Whether every run succeeded and every acceptance property holds.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
bool kato_report_passed(const struct KatoReport *report);

/**
 * Fitted log-log slope of the Kato-layer dissipation against `nu`; NaN when
 * the ladder is too short.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double kato_report_kato_slope(const struct KatoReport *report);

/**
 * The full report as JSON (the same document as `report.json`).
 *
 * # Safety
 * `report` must be a live handle; `out` must be valid for writes. Free the
 * result with [`kato_string_free`].
 */
enum KatoStatus kato_report_to_json(const struct KatoReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void kato_report_free(struct KatoReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KATO_LAB_H */
