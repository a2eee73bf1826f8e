#ifndef STRUCTPRIOR_H
#define STRUCTPRIOR_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_INVALID_ARGUMENT = 1,
  SP_STATUS_PARSE_ERROR = 2,
  SP_STATUS_INTEGRITY_ERROR = 3,
  SP_STATUS_IO_ERROR = 4,
  SP_STATUS_NULL_POINTER = 5,
  SP_STATUS_BUFFER_TOO_SMALL = 6,
  SP_STATUS_PANIC = 7,
} SpStatus;

typedef enum SpPosterior {
  SP_POSTERIOR_ONE_HOT = 0,
  SP_POSTERIOR_GAUSS_DYNAMIC = 1,
  SP_POSTERIOR_GAUSS_STATIC = 2,
} SpPosterior;

typedef enum SpMetric {
  SP_METRIC_WASSERSTEIN = 0,
  SP_METRIC_KL = 1,
} SpMetric;

/**
 * Opaque environment handle.
 */
typedef struct SpEnv SpEnv;

/**
 * Opaque handle to a trained model file.
 */
typedef struct SpModel SpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Never null.
 */
const char *sp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sp_version(void);

/**
 * Creates an environment. Free it with [`sp_env_free`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SpStatus sp_env_new(uint32_t branching,
                         uint32_t depth,
                         uint64_t seed,
                         double policy_beta,
                         double threshold,
                         struct SpEnv **out);

/**
 * Creates an environment from its JSON config text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` as in [`sp_env_new`].
 */
enum SpStatus sp_env_from_json(const char *json, struct SpEnv **out);

/**
 * # Safety
 * `env` must come from `sp_env_new`/`sp_env_from_json` and not be used
 * afterwards. Null is ignored.
 */
void sp_env_free(struct SpEnv *env);

/**
 * Writes the 64-character hex config hash plus a terminating NUL.
 *
 * # Safety
 * `env` must be a live handle; `buf` must hold `cap` bytes.
 */
enum SpStatus sp_env_hash(const struct SpEnv *env, char *buf, size_t cap);

/**
 * Exact value of the state `(problem, path[0..len])`.
 *
 * # Safety
 * `env` must be a live handle, `path` must point to `len` actions (may be
 * null when `len == 0`) and `out` must be writable.
 */
enum SpStatus sp_env_true_value(const struct SpEnv *env,
                                uint64_t problem,
                                const uint32_t *path,
                                size_t len,
                                double *out);

/**
 * Outcome of a terminal state: writes 1 for correct, 0 otherwise.
 *
 * # Safety
 * As for [`sp_env_true_value`].
 */
enum SpStatus sp_env_leaf_correct(const struct SpEnv *env,
                                  uint64_t problem,
                                  const uint32_t *path,
                                  size_t len,
                                  int32_t *out);

/**
 * Loads a model file written by `structprior train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SpStatus sp_model_load(const char *path, struct SpModel **out);

/**
 * # Safety
 * `model` must come from [`sp_model_load`] and not be used afterwards.
 * Null is ignored.
 */
void sp_model_free(struct SpModel *model);

/**
 * Verifier value of a non-root state.
 *
 * # Safety
 * Handles must be live; `path`/`out` as in [`sp_env_true_value`].
 */
enum SpStatus sp_model_predict(const struct SpModel *model,
                               const struct SpEnv *env,
                               uint64_t problem,
                               const uint32_t *path,
                               size_t len,
                               double *out);

/**
 * `Bin(k, p)` over the `k + 1` equidistant locations.
 *
 * # Safety
 * `out` must hold `len >= k + 1` doubles.
 */
enum SpStatus sp_binomial_pmf(uint32_t k, double p, double *out, size_t len);

/**
 * Posterior over `k + 1` bins for `c` successes. For `GaussStatic`, a
 * non-positive `static_sigma` selects the default `2 / (3k)`.
 *
 * # Safety
 * `out` must hold `len >= k + 1` doubles.
 */
enum SpStatus sp_make_posterior(enum SpPosterior kind,
                                double static_sigma,
                                uint32_t c,
                                uint32_t k,
                                double *out,
                                size_t len);

/**
 * 1-Wasserstein distance between two probability vectors of length `len`
 * on the equidistant grid over `[0, 1]`.
 *
 * # Safety
 * `a` and `b` must point to `len` doubles; `out` must be writable.
 */
enum SpStatus sp_wasserstein1(const double *a, const double *b, size_t len, double *out);

/**
 * Statistics-based distance between a posterior family and `Bin(k, p)`.
 * KL absolute-continuity violations yield `INFINITY` with status `Ok`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SpStatus sp_statistics_distance(enum SpPosterior kind,
                                     double static_sigma,
                                     uint32_t k,
                                     double p,
                                     enum SpMetric metric,
                                     double *out);

/**
 * Standard normal CDF.
 */
double sp_std_normal_cdf(double x);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRUCTPRIOR_H */
