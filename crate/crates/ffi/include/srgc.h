#ifndef SRGC_H
#define SRGC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Pass as `burn_in` to use the mixing-time default.
#define SRGC_DEFAULT_BURN_IN -1

typedef enum SrgcStatus {
  SRGC_STATUS_OK = 0,
  SRGC_STATUS_NULL_POINTER = 1,
  SRGC_STATUS_INVALID_UTF8 = 2,
  SRGC_STATUS_INVALID_ARGUMENT = 3,
  SRGC_STATUS_DIMENSION_MISMATCH = 4,
  SRGC_STATUS_INVALID_MODEL = 5,
  SRGC_STATUS_NOT_NULL = 6,
  SRGC_STATUS_NOT_POSITIVE_DEFINITE = 7,
  SRGC_STATUS_RANK_DEFICIENT = 8,
  SRGC_STATUS_SINGULAR = 9,
  SRGC_STATUS_DEGENERATE_LAW = 10,
  SRGC_STATUS_UNSTABLE_FIT = 11,
  SRGC_STATUS_NON_CONVERGENT = 12,
  SRGC_STATUS_UNACHIEVABLE = 13,
  SRGC_STATUS_ACCURACY_NOT_MET = 14,
  SRGC_STATUS_IO = 15,
  SRGC_STATUS_PARSE = 16,
  SRGC_STATUS_BUFFER_TOO_SMALL = 17,
  SRGC_STATUS_INTERNAL = 18,
  SRGC_STATUS_PANIC = 19,
} SrgcStatus;

// A generalised χ² null law.
typedef struct SrgcLaw SrgcLaw;

// A VAR model together with its `(x, y)` partition.
typedef struct SrgcModel SrgcModel;

// A multivariate series, `len` rows by `n` columns.
typedef struct SrgcSeries SrgcSeries;

// Outcome of a test on a series.
typedef struct SrgcTestResult {
  // Estimated GC in nats.
  double statistic;
  // `N` times the statistic.
  double scaled;
  double p_value;
  double critical;
  bool reject;
  uintptr_t fitted_order;
} SrgcTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next `srgc_*` call on the same thread.
const char *srgc_last_error_message(void);

// Library version as a static nul-terminated string.
const char *srgc_version(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from an `srgc_*` function that returns an owned string.
void srgc_string_free(char *s);

// Parses a model JSON document (`n`, `p`, `A`, `Sigma`, `partition`).
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum SrgcStatus srgc_model_from_json(const char *json, struct SrgcModel **out);

// Builds a model from row-major `A` (`n × n·p`, lag blocks side by side)
// and `Sigma` (`n × n`); the first `nx` variables form the target block.
//
// # Safety
// `a` must hold `n·n·p` doubles and `sigma` `n·n`; `out` must be writable.
enum SrgcStatus srgc_model_new(uintptr_t n,
                               uintptr_t p,
                               const double *a,
                               const double *sigma,
                               uintptr_t nx,
                               struct SrgcModel **out);

// Random VAR(p) with spectral radius `rho` and residual log-generalised
// correlation `gamma`. With `null` set there is no `y → x` causality;
// otherwise the population GC equals `target_gc`.
//
// # Safety
// `out` must be writable.
enum SrgcStatus srgc_model_random(uintptr_t nx,
                                  uintptr_t ny,
                                  uintptr_t p,
                                  double rho,
                                  double gamma,
                                  bool null,
                                  double target_gc,
                                  uint64_t seed,
                                  struct SrgcModel **out);

// Serialises a model to JSON; free the string with [`srgc_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_model_to_json(const struct SrgcModel *model, char **out);

// # Safety
// `model` must be a live handle; each non-NULL out pointer must be writable.
enum SrgcStatus srgc_model_dims(const struct SrgcModel *model,
                                uintptr_t *n,
                                uintptr_t *p,
                                uintptr_t *nx);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_model_spectral_radius(const struct SrgcModel *model, double *out);

// NULL is ignored.
//
// # Safety
// `model` must be NULL or a handle not yet freed.
void srgc_model_free(struct SrgcModel *model);

// Copies a row-major `len × n` buffer into a series handle.
//
// # Safety
// `data` must hold `len·n` doubles; `out` must be writable.
enum SrgcStatus srgc_series_new(const double *data,
                                uintptr_t len,
                                uintptr_t n,
                                struct SrgcSeries **out);

// Simulates `len` observations after `burn_in` discarded steps
// (any negative value, such as [`SRGC_DEFAULT_BURN_IN`], for the default).
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_simulate(const struct SrgcModel *model,
                              uintptr_t len,
                              int64_t burn_in,
                              uint64_t seed,
                              struct SrgcSeries **out);

// # Safety
// `series` must be a live handle; out pointers must be writable.
enum SrgcStatus srgc_series_dims(const struct SrgcSeries *series, uintptr_t *len, uintptr_t *n);

// Copies the series, row-major, into `buf` of capacity `cap` doubles.
//
// # Safety
// `series` must be a live handle; `buf` must hold `cap` doubles.
enum SrgcStatus srgc_series_data(const struct SrgcSeries *series, double *buf, uintptr_t cap);

// NULL is ignored.
//
// # Safety
// `series` must be NULL or a handle not yet freed.
void srgc_series_free(struct SrgcSeries *series);

// Population GC `y → x` in nats.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_gc_time(const struct SrgcModel *model, double *out);

// Spectral GC at angular frequency `omega` (radians).
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_gc_spectral(const struct SrgcModel *model, double omega, double *out);

// Band-averaged spectral GC over `[lo, hi] ⊆ [0, 2π]`.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_gc_band(const struct SrgcModel *model, double lo, double hi, double *out);

// Time-domain null law at a null model.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_null_law_time(const struct SrgcModel *model, struct SrgcLaw **out);

// Band-limited null law at a null model.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_null_law_band(const struct SrgcModel *model,
                                   double lo,
                                   double hi,
                                   struct SrgcLaw **out);

// Law from explicit weights, each carrying `multiplicity` degrees of freedom.
//
// # Safety
// `weights` must hold `len` doubles; `out` must be writable.
enum SrgcStatus srgc_law_new(const double *weights,
                             uintptr_t len,
                             uintptr_t multiplicity,
                             struct SrgcLaw **out);

// Number of distinct weights and their multiplicity.
//
// # Safety
// `law` must be a live handle; out pointers must be writable.
enum SrgcStatus srgc_law_dims(const struct SrgcLaw *law, uintptr_t *len, uintptr_t *multiplicity);

// Copies the weights, descending, into `buf` of capacity `cap`.
//
// # Safety
// `law` must be a live handle; `buf` must hold `cap` doubles.
enum SrgcStatus srgc_law_weights(const struct SrgcLaw *law, double *buf, uintptr_t cap);

// # Safety
// `law` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_law_cdf(const struct SrgcLaw *law, double x, double *out);

// # Safety
// `law` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_law_quantile(const struct SrgcLaw *law, double q, double *out);

// NULL is ignored.
//
// # Safety
// `law` must be NULL or a handle not yet freed.
void srgc_law_free(struct SrgcLaw *law);

// Projection test at fixed order `p` on the time-domain statistic; the
// first `nx` columns are the target block.
//
// # Safety
// `series` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_projection_test(const struct SrgcSeries *series,
                                     uintptr_t nx,
                                     uintptr_t p,
                                     double alpha,
                                     struct SrgcTestResult *out);

// Likelihood-ratio test against χ²(p·nx·ny).
//
// # Safety
// `series` must be a live handle; `out` must be writable.
enum SrgcStatus srgc_lr_test(const struct SrgcSeries *series,
                             uintptr_t nx,
                             uintptr_t p,
                             double alpha,
                             struct SrgcTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRGC_H */
