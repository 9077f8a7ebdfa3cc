#ifndef AADS_H
#define AADS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Values 1–15 mirror the library error kinds.
typedef enum AadsStatus {
  AADS_STATUS_OK = 0,
  AADS_STATUS_DOMAIN = 1,
  AADS_STATUS_STENCIL = 2,
  AADS_STATUS_CONSTRUCTION = 3,
  AADS_STATUS_CONFIG = 4,
  AADS_STATUS_COVERAGE = 5,
  AADS_STATUS_DEGENERATE_PLANE = 6,
  AADS_STATUS_SINGULARITY = 7,
  AADS_STATUS_NON_CONVEX = 8,
  AADS_STATUS_AMBIGUOUS = 9,
  AADS_STATUS_PRECONDITION = 10,
  AADS_STATUS_UNSUPPORTED = 11,
  AADS_STATUS_OUT_OF_REGION = 12,
  AADS_STATUS_OFF_HORIZON = 13,
  AADS_STATUS_DIVERGENCE = 14,
  AADS_STATUS_INDETERMINATE = 15,
  // A required pointer was null.
  AADS_STATUS_NULL_POINTER = 100,
  // A string argument was not valid UTF-8 or JSON.
  AADS_STATUS_INVALID_INPUT = 101,
  AADS_STATUS_PANIC = 102,
} AadsStatus;

// Opaque spacetime model.
typedef struct AadsModel AadsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty if none). Valid until the next call.
const char *aads_last_error(void);

// Builds a model from a JSON spec such as `{"family": "ads_global", "d": 4, "R": 1.0}`.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
enum AadsStatus aads_model_new(const char *spec_json, struct AadsModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `m` must come from `aads_model_new` and not be used afterwards.
void aads_model_free(struct AadsModel *m);

// Spacetime dimension of the model, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live model handle.
uintptr_t aads_model_dim(const struct AadsModel *m);

// Writes the `n × n` metric (row-major) at the chart point `x` into `out`.
//
// # Safety
// `x` must hold `n` values and `out` room for `n * n`.
enum AadsStatus aads_metric_at(const struct AadsModel *m,
                               const double *x,
                               uintptr_t n,
                               double *out);

// Largest component of `Ric − (2Λ/(d−2)) g` at `x`.
//
// # Safety
// `x` must hold `n` values; `out` must be valid.
enum AadsStatus aads_einstein_residual(const struct AadsModel *m,
                                       const double *x,
                                       uintptr_t n,
                                       double lambda,
                                       double *out);

// Integrates a geodesic from `(x, v)` up to `max_affine` with boundary
// detection. On a boundary hit writes `τ` to `tau`, `e` (length `n − 1`) to
// `e` and 1 to `hit`; otherwise writes 0 to `hit`.
//
// # Safety
// `x`, `v` must hold `n` values, `e` room for `n − 1`; `tau` and `hit` must be valid.
enum AadsStatus aads_geodesic_boundary_hit(const struct AadsModel *m,
                                           const double *x,
                                           const double *v,
                                           uintptr_t n,
                                           double max_affine,
                                           double *tau,
                                           double *e,
                                           int32_t *hit);

// Time-delay fan of `n_directions` rays from the boundary point `(tau, e)`;
// writes the smallest and largest delay past the antipodal point.
//
// # Safety
// `e` must hold `n_e` values; `min_delay`, `max_delay` must be valid.
enum AadsStatus aads_time_delay(const struct AadsModel *m,
                                double tau,
                                const double *e,
                                uintptr_t n_e,
                                uintptr_t n_directions,
                                double *min_delay,
                                double *max_delay);

// Fefferman–Graham table for analytic boundary data (`"esu"` or
// `"minkowski"`) as JSON. Free the string with `aads_string_free`.
//
// # Safety
// `boundary` must be a NUL-terminated string and `out` a valid pointer.
enum AadsStatus aads_fg_table_json(const char *boundary, uintptr_t d, uintptr_t order, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void aads_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AADS_H */
