#ifndef SPDC_BENCH_H
#define SPDC_BENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Flags for [`spdc_run`].
 */
#define SPDC_MODE_INCOHERENT_SOURCE 1

#define SPDC_MODE_TWO_AXIS_CHECK 2

typedef enum SpdcStatus {
  SPDC_STATUS_OK = 0,
  SPDC_STATUS_NULL_POINTER = 1,
  SPDC_STATUS_INVALID_ARGUMENT = 2,
  SPDC_STATUS_INVALID_LAYOUT = 3,
  SPDC_STATUS_DOMAIN = 4,
  SPDC_STATUS_FIT_INSUFFICIENT_DATA = 5,
  SPDC_STATUS_FIT_NON_CONVERGENCE = 6,
  SPDC_STATUS_BUFFER_TOO_SMALL = 7,
  SPDC_STATUS_PANIC = 8,
} SpdcStatus;

typedef enum SpdcHistogram {
  SPDC_HISTOGRAM_TOTAL = 0,
  SPDC_HISTOGRAM_COINC_A = 1,
  SPDC_HISTOGRAM_COINC_B = 2,
  SPDC_HISTOGRAM_NO_COINC = 3,
} SpdcHistogram;

/**
 * Bench geometry handle.
 */
typedef struct SpdcLayout SpdcLayout;

/**
 * Finished simulation handle.
 */
typedef struct SpdcRunResult SpdcRunResult;

typedef struct SpdcDesignParams {
  double f;
  double g;
  double h;
} SpdcDesignParams;

/**
 * Plain copy of every layout field, SI units.
 */
typedef struct SpdcLayoutFields {
  double wavelength;
  double phi0;
  double source_width;
  double crystal_thickness;
  double slit_distance;
  double slit_separation;
  double slit_width;
  double idler_distance;
  double detector_angular_radius;
  double screen_distance;
} SpdcLayoutFields;

typedef struct SpdcEntanglement {
  double k_pe;
  double k_ae;
  double ratio;
  bool in_window;
} SpdcEntanglement;

typedef struct SpdcFeasibility {
  bool resolution_ok;
  bool discrimination_ok;
  bool width_ok;
  bool window_ok;
  double resolution_margin;
  double discrimination_margin;
  double width_margin;
  double window_margin;
  double derived_width_bound;
  double min_relative_margin;
} SpdcFeasibility;

typedef struct SpdcCounters {
  uint64_t n_pairs_sampled;
  uint64_t n_blocked;
  uint64_t n_single_access;
  uint64_t n_both_access;
  uint64_t n_single_untransmitted;
  uint64_t n_screen;
  uint64_t n_coinc_a;
  uint64_t n_coinc_b;
} SpdcCounters;

typedef struct SpdcFringeAnalysis {
  double period;
  double visibility;
  double phase;
  double fringe_fraction;
  double fit_residual;
  double raw_visibility;
} SpdcFringeAnalysis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the buffer size the full message needs.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t spdc_last_error_message(char *buf, size_t len);

/**
 * The concrete design bench.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum SpdcStatus spdc_layout_paper(struct SpdcLayout **out);

/**
 * Builds a layout from design inputs; `phi0 <= 0` derives it from f, g, h.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum SpdcStatus spdc_layout_from_design(double wavelength,
                                        double phi0,
                                        struct SpdcDesignParams params,
                                        double slit_distance,
                                        struct SpdcLayout **out);

/**
 * Validates and wraps explicit fields.
 *
 * # Safety
 * `fields` must point to a readable struct; `out` must be valid for a
 * pointer write.
 */
enum SpdcStatus spdc_layout_from_fields(const struct SpdcLayoutFields *fields,
                                        struct SpdcLayout **out);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_layout_fields(const struct SpdcLayout *layout, struct SpdcLayoutFields *out);

/**
 * # Safety
 * `layout` must be null or a handle not yet freed.
 */
void spdc_layout_free(struct SpdcLayout *layout);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_zone_axial_extent(const struct SpdcLayout *layout, double *out);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_both_access_fraction(const struct SpdcLayout *layout, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SpdcStatus spdc_double_slit_count_fraction(double p_both, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SpdcStatus spdc_phi0_from_fgh(struct SpdcDesignParams params, double *out);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_params_from_layout(const struct SpdcLayout *layout,
                                        struct SpdcDesignParams *out);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_entanglement(const struct SpdcLayout *layout, struct SpdcEntanglement *out);

/**
 * # Safety
 * `layout` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_feasibility(const struct SpdcLayout *layout, struct SpdcFeasibility *out);

/**
 * Runs the Monte Carlo. `modes` is a bitwise OR of `SPDC_MODE_*`;
 * `workers = 0` uses every core.
 *
 * # Safety
 * `layout` must be a live handle; `out` must be valid for a pointer write.
 */
enum SpdcStatus spdc_run(const struct SpdcLayout *layout,
                         uint64_t n_pairs,
                         uint64_t seed,
                         uint32_t workers,
                         uint32_t modes,
                         struct SpdcRunResult **out);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void spdc_run_free(struct SpdcRunResult *run);

/**
 * Number of histogram bins, and the window geometry when the pointers are
 * non-null.
 *
 * # Safety
 * `run` must be a live handle; the out pointers must be null or writable.
 */
enum SpdcStatus spdc_run_window(const struct SpdcRunResult *run,
                                size_t *n_bins,
                                double *lower_edge,
                                double *bin_width);

/**
 * Copies one histogram into `buf`, which must hold at least `n_bins`
 * values.
 *
 * # Safety
 * `run` must be a live handle; `buf` must be valid for `len` writes.
 */
enum SpdcStatus spdc_run_histogram(const struct SpdcRunResult *run,
                                   enum SpdcHistogram which,
                                   uint64_t *buf,
                                   size_t len);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_run_counters(const struct SpdcRunResult *run, struct SpdcCounters *out);

/**
 * Writes the 64-character hex config digest plus NUL; `len` must be at
 * least 65.
 *
 * # Safety
 * `run` must be a live handle; `buf` must be valid for `len` bytes.
 */
enum SpdcStatus spdc_run_digest(const struct SpdcRunResult *run, char *buf, size_t len);

/**
 * Fits one histogram of a run against the simulated layout. The fringe
 * fraction is referenced to the both-access component's own visibility.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum SpdcStatus spdc_run_fit(const struct SpdcRunResult *run,
                             enum SpdcHistogram which,
                             struct SpdcFringeAnalysis *out);

/**
 * Fits arbitrary uniformly binned counts with the layout's envelope.
 *
 * # Safety
 * `counts` must be valid for `n` reads; `layout` must be a live handle;
 * `out` must be writable.
 */
enum SpdcStatus spdc_fit_counts(double lower_edge,
                                double bin_width,
                                const double *counts,
                                size_t n,
                                double period_hint,
                                const struct SpdcLayout *layout,
                                struct SpdcFringeAnalysis *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPDC_BENCH_H */
