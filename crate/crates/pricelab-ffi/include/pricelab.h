/* C interface to the pricelab price-index pipeline. Generated by cbindgen. */

#ifndef PRICELAB_H
#define PRICELAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. `Ok` is zero; everything else carries a message
 * retrievable with `pl_last_error` on the calling thread.
 */
typedef enum PlStatus {
  /**
   * The call succeeded.
   */
  PL_STATUS_OK = 0,
  /**
   * Invalid options or flag combination, rejected before computation.
   */
  PL_STATUS_USAGE = 1,
  /**
   * The input data does not support the requested computation.
   */
  PL_STATUS_DATA = 2,
  /**
   * A numerical procedure failed on otherwise valid data.
   */
  PL_STATUS_NUMERICAL = 3,
  /**
   * A required pointer argument was null.
   */
  PL_STATUS_NULL_ARGUMENT = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  PL_STATUS_INVALID_UTF8 = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  PL_STATUS_PANIC = 6,
} PlStatus;

/**
 * A finished pipeline run: the emitted series and the manifest. Opaque.
 */
typedef struct PlRun PlRun;

/**
 * One named monthly index series copied out of a run. Opaque.
 */
typedef struct PlSeries PlSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null if every call
 * so far succeeded. Valid until the next failing call on the same thread.
 */
const char *pl_last_error(void);

/**
 * Library version as a static string.
 */
const char *pl_version(void);

/**
 * Parse the input files, compute the configured index series, write the
 * artifacts (series, manifest, rejects) under `output_dir`, and hand back a
 * run handle for in-memory access to the same results.
 *
 * `inputs` is an array of `n_inputs` file paths. `options_json` configures
 * the run (see the README for the schema); pass null or `"{}"` for the
 * defaults (full-window GEKS, one series over the whole panel, CSV output).
 * On success `*out_run` owns the results and must be released with
 * `pl_run_free`.
 *
 * # Safety
 *
 * `inputs` must point to `n_inputs` valid NUL-terminated strings;
 * `output_dir` and (when non-null) `options_json` must be valid
 * NUL-terminated strings; `out_run` must be a valid writable pointer.
 */
enum PlStatus pl_run(const char *const *inputs,
                     size_t n_inputs,
                     const char *output_dir,
                     const char *options_json,
                     struct PlRun **out_run);

/**
 * Release a run handle. Null is a no-op.
 *
 * # Safety
 *
 * `run` must be null or a pointer obtained from `pl_run` that has not been
 * freed yet; strings borrowed from the handle become invalid.
 */
void pl_run_free(struct PlRun *run);

/**
 * Number of series in the run (each partition cell, then `total` when
 * aggregating; a single `all` series otherwise). Null yields 0.
 *
 * # Safety
 *
 * `run` must be null or a live handle from `pl_run`.
 */
size_t pl_run_series_count(const struct PlRun *run);

/**
 * Name of the series at `index`, owned by the run. Null handle or an
 * out-of-range index yields null.
 *
 * # Safety
 *
 * `run` must be null or a live handle from `pl_run`.
 */
const char *pl_run_series_name(const struct PlRun *run, size_t index);

/**
 * Copy the series at `index` out of the run into a standalone handle that
 * survives `pl_run_free`. Release it with `pl_series_free`.
 *
 * # Safety
 *
 * `run` must be a live handle from `pl_run`; `out_series` must be a valid
 * writable pointer.
 */
enum PlStatus pl_run_open_series(const struct PlRun *run,
                                 size_t index,
                                 struct PlSeries **out_series);

/**
 * The run manifest (configuration echo, record counts, computed and
 * excluded cells) as a JSON string owned by the run. Null handle yields
 * null.
 *
 * # Safety
 *
 * `run` must be null or a live handle from `pl_run`.
 */
const char *pl_run_manifest_json(const struct PlRun *run);

/**
 * Release a series handle. Null is a no-op.
 *
 * # Safety
 *
 * `series` must be null or a pointer from `pl_run_open_series` that has not
 * been freed yet.
 */
void pl_series_free(struct PlSeries *series);

/**
 * Name of the series (its cell label). Null yields null.
 *
 * # Safety
 *
 * `series` must be null or a live handle from `pl_run_open_series`.
 */
const char *pl_series_name(const struct PlSeries *series);

/**
 * Number of monthly points in the series. Null yields 0.
 *
 * # Safety
 *
 * `series` must be null or a live handle from `pl_run_open_series`.
 */
size_t pl_series_len(const struct PlSeries *series);

/**
 * Month label ("YYYY-MM") of the point at `index`, owned by the series.
 * Null handle or an out-of-range index yields null.
 *
 * # Safety
 *
 * `series` must be null or a live handle from `pl_run_open_series`.
 */
const char *pl_series_month(const struct PlSeries *series, size_t index);

/**
 * Index value of the point at `index`, written to `out_value`.
 *
 * # Safety
 *
 * `series` must be a live handle from `pl_run_open_series`; `out_value`
 * must be a valid writable pointer.
 */
enum PlStatus pl_series_value(const struct PlSeries *series, size_t index, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICELAB_H */
