#ifndef NEARFAR_H
#define NEARFAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_INVALID_ARGUMENT = 1,
  NF_STATUS_DEGENERATE_GEOMETRY = 2,
  NF_STATUS_NUMERICAL_FAILURE = 3,
  NF_STATUS_NO_SOLUTION = 4,
  NF_STATUS_CONFIG_ERROR = 5,
  NF_STATUS_RUN_FAILURE = 6,
  NF_STATUS_IO_ERROR = 7,
  NF_STATUS_NULL_POINTER = 8,
  NF_STATUS_PANIC = 9,
} NfStatus;

/**
 * Linear array handle.
 */
typedef struct NfGeometry NfGeometry;

/**
 * Parsed scenario configuration handle.
 */
typedef struct NfScenario NfScenario;

/**
 * Result table of a scenario run.
 */
typedef struct NfTable NfTable;

/**
 * Misspecified-bound summary at one position.
 */
typedef struct NfBoundReport {
  double peb_m;
  double lb_mm_m;
  double bias_m;
  double mme_db;
  double pseudo_true_aoa_rad;
  double pseudo_true_delay_s;
  size_t iterations;
} NfBoundReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *nf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nf_version(void);

/**
 * Uniform linear array of `n` elements along y, spacing in carrier wavelengths.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum NfStatus nf_geometry_ula(size_t n,
                              double spacing_wavelengths,
                              double carrier_hz,
                              struct NfGeometry **out_geom);

/**
 * # Safety
 * `geom` must come from [`nf_geometry_ula`] and not be used afterwards. NULL is ignored.
 */
void nf_geometry_free(struct NfGeometry *geom);

/**
 * # Safety
 * `geom` must be a live handle and `out_m` writable.
 */
enum NfStatus nf_geometry_aperture(const struct NfGeometry *geom, double *out_m);

/**
 * Fraunhofer distance at the carrier wavelength.
 *
 * # Safety
 * `geom` must be a live handle and `out_m` writable.
 */
enum NfStatus nf_geometry_fraunhofer_distance(const struct NfGeometry *geom, double *out_m);

/**
 * UMi street-canyon LoS probability at 2D distance `d2d_m`.
 *
 * # Safety
 * `out_p` must be writable.
 */
enum NfStatus nf_los_probability_umi(double d2d_m, double *out_p);

/**
 * KL divergence between two univariate Gaussians, nats.
 *
 * # Safety
 * `out_nats` must be writable.
 */
enum NfStatus nf_kl_gaussian(double mu1, double var1, double mu2, double var2, double *out_nats);

/**
 * Parses and validates a JSON scenario.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_scenario` writable.
 */
enum NfStatus nf_scenario_from_json(const char *json, struct NfScenario **out_scenario);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_scenario` writable.
 */
enum NfStatus nf_scenario_from_file(const char *path, struct NfScenario **out_scenario);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum NfStatus nf_scenario_set_seed(struct NfScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must come from a `nf_scenario_from_*` call. NULL is ignored.
 */
void nf_scenario_free(struct NfScenario *scenario);

/**
 * Runs the scenario on `threads` workers (0 means all cores). Failed cells
 * are part of the table; the run itself fails with `NF_STATUS_RUN_FAILURE`
 * when too many cells failed, in which case no table is returned.
 *
 * # Safety
 * `scenario` must be a live handle and `out_table` writable.
 */
enum NfStatus nf_scenario_run(const struct NfScenario *scenario,
                              size_t threads,
                              struct NfTable **out_table);

/**
 * Misspecified-bound report at `(x_m, y_m)` for an mme-map scenario.
 *
 * # Safety
 * `scenario` must be a live handle and `out_report` writable.
 */
enum NfStatus nf_bound_report(const struct NfScenario *scenario,
                              double x_m,
                              double y_m,
                              struct NfBoundReport *out_report);

/**
 * # Safety
 * `table` must be a live handle or NULL (returns 0).
 */
size_t nf_table_rows(const struct NfTable *table);

/**
 * Row `row` of a table. `out_ok` is 1 for a successful cell and 0 for a
 * flagged one (whose value is NaN).
 *
 * # Safety
 * `table` must be a live handle; the out pointers must be writable.
 */
enum NfStatus nf_table_row(const struct NfTable *table,
                           size_t row,
                           double *out_x_m,
                           double *out_y_m,
                           double *out_value,
                           int32_t *out_ok);

/**
 * Writes the table as CSV.
 *
 * # Safety
 * `table` must be a live handle and `path` a NUL-terminated string.
 */
enum NfStatus nf_table_write_csv(const struct NfTable *table, const char *path);

/**
 * # Safety
 * `table` must come from [`nf_scenario_run`]. NULL is ignored.
 */
void nf_table_free(struct NfTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEARFAR_H */
