#ifndef NLPR_H
#define NLPR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum NlprStatus {
  NLPR_STATUS_OK = 0,
  NLPR_STATUS_NULL_POINTER = 1,
  NLPR_STATUS_INVALID_PARAMETER = 2,
  NLPR_STATUS_OUT_OF_BOUNDS = 3,
  NLPR_STATUS_DEGENERATE = 4,
  NLPR_STATUS_NUMERICAL = 5,
  NLPR_STATUS_IO = 6,
  NLPR_STATUS_FORMAT = 7,
  NLPR_STATUS_PANIC = 8,
} NlprStatus;

/**
 * Opaque image handle.
 */
typedef struct NlprImage NlprImage;

/**
 * Denoising parameters. Intensities and `h` are on the `[0, 1]` scale.
 */
typedef struct NlprDenoiseParams {
  /**
   * Search window side `S` (odd).
   */
  size_t window;
  /**
   * Patch side `k` (odd).
   */
  size_t patch_side;
  double h;
  /**
   * Regression index in `(0, 2]`.
   */
  double p;
  /**
   * Keep only the nearest half of the neighbors.
   */
  bool knn_truncation;
  /**
   * `0` selects the default cap for `p`.
   */
  size_t max_iters;
} NlprDenoiseParams;

typedef struct NlprDenoiseStats {
  double mean_iterations;
  double converged_fraction;
} NlprDenoiseStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Human-readable name of a status code. The returned string is static.
 */
const char *nlpr_status_str(enum NlprStatus status);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nlpr_last_error_message(char *buf, size_t len);

/**
 * Creates an image from `width * height` row-major samples (copied).
 *
 * # Safety
 * `data` must point to `width * height` readable doubles; `out` must be writable.
 */
enum NlprStatus nlpr_image_new(size_t width,
                               size_t height,
                               const double *data,
                               struct NlprImage **out);

/**
 * Releases an image handle. Null is ignored.
 *
 * # Safety
 * `img` must be null or a handle returned by this library that was not yet freed.
 */
void nlpr_image_free(struct NlprImage *img);

/**
 * # Safety
 * `img` must be null or a live handle.
 */
size_t nlpr_image_width(const struct NlprImage *img);

/**
 * # Safety
 * `img` must be null or a live handle.
 */
size_t nlpr_image_height(const struct NlprImage *img);

/**
 * Copies the samples into `out`, which must hold `len >= width * height` doubles.
 *
 * # Safety
 * `img` must be a live handle and `out` must point to `len` writable doubles.
 */
enum NlprStatus nlpr_image_copy_data(const struct NlprImage *img, double *out, size_t len);

/**
 * Reads an 8-bit binary PGM; samples are scaled to `[0, 1]`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum NlprStatus nlpr_image_read_pgm(const char *path, struct NlprImage **out);

/**
 * Writes an 8-bit binary PGM, clamping to `[0, 1]` and rounding.
 *
 * # Safety
 * `img` must be a live handle and `path` a NUL-terminated string.
 */
enum NlprStatus nlpr_image_write_pgm(const struct NlprImage *img, const char *path);

/**
 * Adds seeded Gaussian noise of standard deviation `sigma` (`[0, 1]` scale).
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
enum NlprStatus nlpr_add_noise(const struct NlprImage *img,
                               double sigma,
                               uint64_t seed,
                               struct NlprImage **out);

/**
 * PSNR in dB of `estimate` against `reference`; `+inf` when they are equal.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum NlprStatus nlpr_psnr(const struct NlprImage *reference,
                          const struct NlprImage *estimate,
                          double *out);

/**
 * Default parameters for noise level `sigma` (`[0, 1]` scale): `S = 21`,
 * `k = 7`, `h = 10 sigma`, `p = 0.1`, truncation on.
 */
struct NlprDenoiseParams nlpr_default_params(double sigma);

/**
 * Denoises `img`. `stats` may be null.
 *
 * # Safety
 * `img` must be a live handle, `params` readable, `out` writable and `stats` null or writable.
 */
enum NlprStatus nlpr_denoise(const struct NlprImage *img,
                             const struct NlprDenoiseParams *params,
                             struct NlprImage **out,
                             struct NlprDenoiseStats *stats);

/**
 * Closed-form non-local means over the full search window.
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
enum NlprStatus nlpr_nlm(const struct NlprImage *img,
                         size_t window,
                         size_t patch_side,
                         double h,
                         struct NlprImage **out);

/**
 * Weighted lp regression of `count` points of dimension `dim`, started from their
 * weighted mean. `patches` is `count * dim` row-major; `estimate` receives `dim` values.
 * `iterations` and `converged` may be null. `max_iters = 0` selects the default cap.
 *
 * # Safety
 * All non-null pointers must reference buffers of the stated sizes.
 */
enum NlprStatus nlpr_irls_solve(const double *patches,
                                const double *weights,
                                size_t count,
                                size_t dim,
                                double p,
                                size_t max_iters,
                                double *estimate,
                                size_t *iterations,
                                bool *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLPR_H */
