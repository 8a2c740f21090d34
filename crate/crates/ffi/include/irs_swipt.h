#ifndef IRS_SWIPT_H
#define IRS_SWIPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrsStatus {
  IRS_STATUS_OK = 0,
  IRS_STATUS_NULL_POINTER = 1,
  IRS_STATUS_INVALID_UTF8 = 2,
  IRS_STATUS_INVALID_CONFIG = 3,
  IRS_STATUS_PARSE = 4,
  /**
   * No feasible point was found for the scenario.
   */
  IRS_STATUS_INFEASIBLE = 5,
  IRS_STATUS_NUMERICAL = 6,
  IRS_STATUS_DIMENSION = 7,
  /**
   * Output buffer too small; the required length is still written.
   */
  IRS_STATUS_BUFFER_TOO_SMALL = 8,
  IRS_STATUS_IO = 9,
  IRS_STATUS_PANIC = 10,
} IrsStatus;

/**
 * Scenario configuration.
 */
typedef struct IrsConfig IrsConfig;

/**
 * A solution with the scenario it was computed on.
 */
typedef struct IrsSolution IrsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *irs_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void irs_string_free(char *s);

/**
 * The default scenario (K=4, N=4, M=30).
 */
struct IrsConfig *irs_config_default(void);

/**
 * Parses the `key = value` config format; missing keys take defaults.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrsStatus irs_config_parse(const char *text, struct IrsConfig **out);

/**
 * Config in the `key = value` format. Free with [`irs_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle.
 */
char *irs_config_to_string(const struct IrsConfig *cfg);

/**
 * Sets the user, antenna and element counts.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum IrsStatus irs_config_set_dims(struct IrsConfig *cfg,
                                   size_t users,
                                   size_t antennas,
                                   size_t elements);

/**
 * Sets the SINR threshold (dB) and the harvested-energy threshold (dBm).
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum IrsStatus irs_config_set_thresholds(struct IrsConfig *cfg, double sinr_db, double energy_dbm);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void irs_config_free(struct IrsConfig *cfg);

/**
 * Builds draw `draw` of `seed` and runs `algorithm` (for example
 * `"JDBPR_OPT"` or `"NO_IRS"`) on it.
 *
 * # Safety
 * `cfg` must be a live handle, `algorithm` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum IrsStatus irs_solve(const struct IrsConfig *cfg,
                         const char *algorithm,
                         uint64_t seed,
                         uint64_t draw,
                         struct IrsSolution **out);

/**
 * Loads a solution written by [`irs_solution_to_json`] or the CLI.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrsStatus irs_solution_from_json(const char *json, struct IrsSolution **out);

/**
 * Free with [`irs_string_free`].
 *
 * # Safety
 * `sol` must be a live handle.
 */
char *irs_solution_to_json(const struct IrsSolution *sol);

/**
 * Total transmit power in watts, NaN for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double irs_solution_objective(const struct IrsSolution *sol);

/**
 * Number of alternating iterations run, 0 for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
size_t irs_solution_iterations(const struct IrsSolution *sol);

/**
 * # Safety
 * `sol` must be a live handle or null.
 */
bool irs_solution_converged(const struct IrsSolution *sol);

/**
 * Power-splitting ratios, one per user.
 *
 * # Safety
 * `sol` must be a live handle, `buf` must hold `cap` values and `len`
 * must be valid or null.
 */
enum IrsStatus irs_solution_split(const struct IrsSolution *sol,
                                  double *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * IRS phases in radians, one per element.
 *
 * # Safety
 * As for [`irs_solution_split`].
 */
enum IrsStatus irs_solution_phases(const struct IrsSolution *sol,
                                   double *buf,
                                   size_t cap,
                                   size_t *len);

/**
 * Beamformer of `user` as interleaved `re, im` pairs (2N values).
 *
 * # Safety
 * As for [`irs_solution_split`].
 */
enum IrsStatus irs_solution_beam(const struct IrsSolution *sol,
                                 size_t user,
                                 double *buf,
                                 size_t cap,
                                 size_t *len);

/**
 * Decoding sequence, first decoded user first.
 *
 * # Safety
 * `sol` must be a live handle, `buf` must hold `cap` values and `len`
 * must be valid or null.
 */
enum IrsStatus irs_solution_order(const struct IrsSolution *sol,
                                  size_t *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * Re-checks every constraint on the rebuilt scenario. `feasible` receives
 * the verdict and `min_margin` the smallest normalized margin.
 *
 * # Safety
 * `sol` must be a live handle; the out pointers must be valid or null.
 */
enum IrsStatus irs_solution_check(const struct IrsSolution *sol,
                                  double tol,
                                  bool *feasible,
                                  double *min_margin);

/**
 * # Safety
 * `sol` must come from this library and not be freed twice.
 */
void irs_solution_free(struct IrsSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRS_SWIPT_H */
