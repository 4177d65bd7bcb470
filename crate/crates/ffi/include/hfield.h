#ifndef HFIELD_H
#define HFIELD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_INVALID_GRID = 3,
  HF_STATUS_SHAPE_MISMATCH = 4,
  HF_STATUS_INVALID_LAW = 5,
  HF_STATUS_ELLIPTICITY = 6,
  HF_STATUS_NOT_MEAN_ZERO = 7,
  HF_STATUS_NOT_CONVERGED = 8,
  HF_STATUS_FORMAT = 9,
  HF_STATUS_IO = 10,
  HF_STATUS_CONFIG = 11,
  HF_STATUS_ASSERTION = 12,
  HF_STATUS_PANIC = 13,
} HfStatus;

// Which field to sample.
typedef enum HfFieldKind {
  HF_FIELD_KIND_GFF_HOM = 0,
  HF_FIELD_KIND_GFF_ENV = 1,
  HF_FIELD_KIND_BILAP_HOM = 2,
  HF_FIELD_KIND_BILAP_ENV = 3,
} HfFieldKind;

typedef enum HfBackend {
  HF_BACKEND_SPECTRAL = 0,
  HF_BACKEND_DENSE = 1,
  HF_BACKEND_KRYLOV = 2,
} HfBackend;

// Opaque environment handle.
typedef struct HfEnvironment HfEnvironment;

// Opaque sampled-field handle.
typedef struct HfField HfField;

// Convergence data of one iterative solve.
typedef struct HfSolveInfo {
  size_t iterations;
  double relative_residual;
} HfSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next failing call on the thread.
const char *hf_last_error(void);

// Library version as a static NUL-terminated string.
const char *hf_version(void);

// Samples i.i.d. edge weights from a law such as `"bernoulli(0.5,1,2)"`, `"uniform(1,2)"` or `"constant(1.5)"`.
//
// # Safety
// `law` must be a NUL-terminated string and `out` a valid pointer.
enum HfStatus hf_environment_sample(const char *law,
                                    size_t dim,
                                    size_t side,
                                    uint64_t seed,
                                    struct HfEnvironment **out);

// Builds an environment from `dim * side^dim` axis-major weights in `[1, ellipticity]`.
//
// # Safety
// `values` must point to `len` doubles and `out` must be valid.
enum HfStatus hf_environment_new(size_t dim,
                                 size_t side,
                                 const double *values,
                                 size_t len,
                                 double ellipticity,
                                 struct HfEnvironment **out);

// Releases an environment; null is ignored.
//
// # Safety
// `env` must come from this library and not be used afterwards.
void hf_environment_free(struct HfEnvironment *env);

// Side length, or 0 for null.
//
// # Safety
// `env` must be null or a live handle.
size_t hf_environment_side(const struct HfEnvironment *env);

// Dimension, or 0 for null.
//
// # Safety
// `env` must be null or a live handle.
size_t hf_environment_dim(const struct HfEnvironment *env);

// Copies the `dim * side^dim` edge weights into `out`.
//
// # Safety
// `env` must be a live handle and `out` must have room for `len` doubles.
enum HfStatus hf_environment_values(const struct HfEnvironment *env, double *out, size_t len);

// `out = -div(a grad f)` with the `N^2`-scaled operator.
//
// # Safety
// `f` and `out` must each hold `len = side^dim` doubles.
enum HfStatus hf_environment_apply(const struct HfEnvironment *env,
                                   const double *f,
                                   double *out,
                                   size_t len);

// Writes an `HFENV1` dump.
//
// # Safety
// `env` must be a live handle and `path` a NUL-terminated string.
enum HfStatus hf_environment_write(const struct HfEnvironment *env, const char *path);

// Reads an `HFENV1` dump.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HfStatus hf_environment_read(const char *path, struct HfEnvironment **out);

// Solves `-div(a grad u) = rhs` for the mean-zero `u` by conjugate gradients.
//
// `rhs` must be mean-zero. `tol <= 0` selects the default tolerance.
// `info` may be null.
//
// # Safety
// `rhs` and `out` must each hold `len = side^dim` doubles.
enum HfStatus hf_solve(const struct HfEnvironment *env,
                       const double *rhs,
                       double *out,
                       size_t len,
                       double tol,
                       struct HfSolveInfo *info);

// Solves `-Delta_N u = rhs` spectrally.
//
// # Safety
// `rhs` and `out` must each hold `len = side^dim` doubles.
enum HfStatus hf_solve_homogeneous(size_t dim,
                                   size_t side,
                                   const double *rhs,
                                   double *out,
                                   size_t len);

// Samples a field driven by the white noise of `noise_seed`.
//
// Homogeneous kinds take `env = NULL` and use `dim`, `side`; environment
// kinds take the grid of `env` and ignore `dim`, `side`. `backend` applies
// to free fields only.
//
// # Safety
// `env` must be null or a live handle, `out` a valid pointer.
enum HfStatus hf_field_sample(enum HfFieldKind kind,
                              const struct HfEnvironment *env,
                              size_t dim,
                              size_t side,
                              enum HfBackend backend,
                              uint64_t noise_seed,
                              struct HfField **out);

// Releases a field; null is ignored.
//
// # Safety
// `field` must come from this library and not be used afterwards.
void hf_field_free(struct HfField *field);

// Number of sites, or 0 for null.
//
// # Safety
// `field` must be null or a live handle.
size_t hf_field_len(const struct HfField *field);

// Kind of the field.
//
// # Safety
// `field` must be a live handle and `kind` a valid pointer.
enum HfStatus hf_field_kind(const struct HfField *field, enum HfFieldKind *kind);

// Copies the site values into `out`.
//
// # Safety
// `field` must be a live handle and `out` must have room for `len` doubles.
enum HfStatus hf_field_values(const struct HfField *field, double *out, size_t len);

// Writes an `HFFLD1` dump.
//
// # Safety
// `field` must be a live handle and `path` a NUL-terminated string.
enum HfStatus hf_field_write(const struct HfField *field, const char *path);

// Reads an `HFFLD1` dump.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HfStatus hf_field_read(const char *path, struct HfField **out);

// Monte-Carlo estimate of the effective coefficient from `replicates` environments.
//
// # Safety
// `law` must be a NUL-terminated string; `mean` and `stderr` valid pointers.
enum HfStatus hf_ahom_estimate(const char *law,
                               size_t dim,
                               size_t side,
                               size_t replicates,
                               uint64_t seed,
                               double *mean,
                               double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFIELD_H */
