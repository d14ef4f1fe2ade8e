/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef OFFGRID_H
#define OFFGRID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum OffgridStatus {
  OFFGRID_STATUS_OK = 0,
  OFFGRID_STATUS_NULL_POINTER = 1,
  OFFGRID_STATUS_INVALID_ARGUMENT = 2,
  OFFGRID_STATUS_CONFIG = 3,
  OFFGRID_STATUS_NUMERICAL = 4,
  OFFGRID_STATUS_IO = 5,
  OFFGRID_STATUS_PANIC = 99,
} OffgridStatus;

// Fourier coefficients on a centred grid, with an optional sample mask.
typedef struct OffgridGrid OffgridGrid;

// Weighted lifting operator for a grid and a filter support.
typedef struct OffgridLift OffgridLift;

// Summary of a solve.
typedef struct OffgridSolveInfo {
  size_t iterations;
  // 0 when the iteration cap was reached.
  uint8_t converged;
  double wall_time;
  double data_residual;
} OffgridSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null.
//
// The pointer stays valid until the next call into this library on the
// same thread.
const char *offgrid_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *offgrid_version(void);

// Grid `[-half_x, half_x] x [-half_y, half_y]` from split real and
// imaginary parts, x fastest.
//
// # Safety
// `re` and `im` must be valid for `len` reads; `out` must be writable.
enum OffgridStatus offgrid_grid_new(uint32_t half_x,
                                    uint32_t half_y,
                                    const double *re,
                                    const double *im,
                                    size_t len,
                                    struct OffgridGrid **out);

// Coefficients of a seeded random phantom (inside 1, outside 0) whose edge
// polynomial is supported on `[-k0, k0]^2`, on the grid `[-grid_half, grid_half]^2`.
//
// # Safety
// `out` must be writable.
enum OffgridStatus offgrid_phantom_random(uint32_t k0,
                                          uint64_t seed,
                                          double smoothness,
                                          uint32_t grid_half,
                                          struct OffgridGrid **out);

// # Safety
// `grid` must be null or a handle from this library, not yet freed.
void offgrid_grid_free(struct OffgridGrid *grid);

// Number of coefficients, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t offgrid_grid_len(const struct OffgridGrid *grid);

// Copies the coefficients into `re` and `im`, each of length `len`.
//
// # Safety
// `grid` must be a live handle; `re` and `im` must be valid for `len` writes.
enum OffgridStatus offgrid_grid_values(const struct OffgridGrid *grid,
                                       double *re,
                                       double *im,
                                       size_t len);

// Sets the sample mask (nonzero bytes are sampled).
//
// # Safety
// `grid` must be a live handle; `mask` must be valid for `len` reads.
enum OffgridStatus offgrid_grid_set_mask(struct OffgridGrid *grid, const uint8_t *mask, size_t len);

// Masks a uniformly drawn `fraction` of the non-DC coefficients plus DC.
//
// # Safety
// `grid` must be a live handle.
enum OffgridStatus offgrid_grid_sample(struct OffgridGrid *grid, double fraction, uint64_t seed);

// Relative error of `estimate` against `truth` over the non-DC coefficients.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum OffgridStatus offgrid_grid_rel_err(const struct OffgridGrid *estimate,
                                        const struct OffgridGrid *truth,
                                        double *out);

// Lifting for the grid `[-grid_half, grid_half]^2` and filters on `[-k, k]^2`.
//
// # Safety
// `out` must be writable.
enum OffgridStatus offgrid_lift_new(uint32_t grid_half, uint32_t k, struct OffgridLift **out);

// # Safety
// `lift` must be null or a handle from this library, not yet freed.
void offgrid_lift_free(struct OffgridLift *lift);

// Shape of the lifted matrix.
//
// # Safety
// `lift` must be a live handle; `rows` and `cols` must be writable.
enum OffgridStatus offgrid_lift_dims(const struct OffgridLift *lift, size_t *rows, size_t *cols);

// Recovers the unsampled coefficients of `samples`.
//
// `delta = 0` enforces the samples exactly; otherwise the data may move
// within an l2 ball of that radius. `max_iters = 0` keeps the default.
// Reaching the iteration cap is not an error; check `info.converged`.
//
// # Safety
// Handles must be live; `out` must be writable; `info` may be null.
enum OffgridStatus offgrid_solve(const struct OffgridLift *lift,
                                 const struct OffgridGrid *samples,
                                 double delta,
                                 size_t max_iters,
                                 struct OffgridGrid **out,
                                 struct OffgridSolveInfo *info);

// Isotropic TV and the circulant-lifting nuclear norm of a real
// `nx x ny` image indexed `[iy * nx + ix]`.
//
// # Safety
// `pixels` must be valid for `nx * ny` reads; outputs must be writable.
enum OffgridStatus offgrid_tv_norms(const double *pixels,
                                    size_t nx,
                                    size_t ny,
                                    double *tv,
                                    double *nuclear);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFGRID_H */
