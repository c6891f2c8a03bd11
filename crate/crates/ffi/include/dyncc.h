#ifndef DYNCC_H
#define DYNCC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DynccStatus {
  DYNCC_STATUS_OK = 0,
  DYNCC_STATUS_NULL_POINTER = 1,
  DYNCC_STATUS_INVALID_PARAMS = 2,
  DYNCC_STATUS_UNSUPPORTED_REGIME = 3,
  DYNCC_STATUS_SUPPRESSION_BUDGET = 4,
  /**
   * DoF undefined or a precondition failed.
   */
  DYNCC_STATUS_UNDEFINED = 5,
  /**
   * A value does not fit the 64-bit output.
   */
  DYNCC_STATUS_OVERFLOW = 6,
  DYNCC_STATUS_INTERNAL = 7,
} DynccStatus;

typedef struct DynccReport DynccReport;

/**
 * Parameters plus the current profile lengths.
 */
typedef struct DynccScenario DynccScenario;

typedef struct DynccCounts {
  uint64_t k_m;
  uint64_t k_u;
  uint64_t j_m;
  uint64_t t_m;
  uint64_t j_u;
  uint64_t t_u;
} DynccCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a scenario with users `1..=K` numbered profile by profile.
 *
 * # Safety
 * `lengths` must point to `profiles` readable `u64`s; `out` must be writable.
 */
enum DynccStatus dyncc_scenario_new(uint32_t alpha,
                                    uint32_t profiles,
                                    uint32_t t_bar,
                                    const uint64_t *lengths,
                                    struct DynccScenario **out);

/**
 * # Safety
 * `scenario` must come from [`dyncc_scenario_new`] and not be freed twice.
 */
void dyncc_scenario_free(struct DynccScenario *scenario);

/**
 * Closed-form DoF as `num/den` in lowest terms.
 *
 * # Safety
 * `scenario` must be a live handle; `num` and `den` must be writable.
 */
enum DynccStatus dyncc_closed_form_dof(const struct DynccScenario *scenario,
                                       uint32_t eta_hat,
                                       uint64_t *num,
                                       uint64_t *den);

/**
 * Builds both schedules, counts them and checks the count against the
 * closed form.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum DynccStatus dyncc_verify(const struct DynccScenario *scenario,
                              uint32_t eta_hat,
                              struct DynccReport **out);

/**
 * # Safety
 * `report` must come from [`dyncc_verify`] and not be freed twice.
 */
void dyncc_report_free(struct DynccReport *report);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum DynccStatus dyncc_report_counts(const struct DynccReport *report, struct DynccCounts *out);

/**
 * DoF of the report; `verified` is false when no schedule could be built.
 *
 * # Safety
 * `report` must be a live handle; the outputs must be writable.
 */
enum DynccStatus dyncc_report_dof(const struct DynccReport *report,
                                  uint64_t *num,
                                  uint64_t *den,
                                  bool *verified);

/**
 * Best `eta_hat` over `0..=max eta_p` and its DoF.
 *
 * # Safety
 * `scenario` must be a live handle; the outputs must be writable.
 */
enum DynccStatus dyncc_optimize(const struct DynccScenario *scenario,
                                uint32_t *best_eta_hat,
                                uint64_t *num,
                                uint64_t *den);

/**
 * Text dump of the whole delivery phase; free with [`dyncc_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum DynccStatus dyncc_schedule_text(const struct DynccScenario *scenario,
                                     uint32_t eta_hat,
                                     char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void dyncc_string_free(char *s);

/**
 * Message from the last failed call on this thread, or NULL. Valid until
 * the next call into the library from the same thread.
 */
const char *dyncc_last_error(void);

const char *dyncc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNCC_H */
