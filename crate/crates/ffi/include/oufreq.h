#ifndef OUFREQ_H
#define OUFREQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum OufreqStatus {
  OUFREQ_STATUS_OK = 0,
  OUFREQ_STATUS_NULL_POINTER = 1,
  OUFREQ_STATUS_INVALID_ARGUMENT = 2,
  OUFREQ_STATUS_INVALID_CONFIG = 3,
  OUFREQ_STATUS_OUT_OF_RANGE = 4,
  OUFREQ_STATUS_NUMERICAL = 5,
  OUFREQ_STATUS_BUFFER_TOO_SMALL = 6,
  OUFREQ_STATUS_PANIC = 7,
} OufreqStatus;

/**
 * Model parameters together with the signal shape.
 */
typedef struct OufreqModel OufreqModel;

/**
 * A simulated sample path.
 */
typedef struct OufreqPath OufreqPath;

typedef struct OufreqEstimate {
  double theta_hat;
  double normalized_error;
  double loglik_at_hat;
  double se_hat;
  uint64_t iterations;
  bool converged;
  bool boundary;
} OufreqEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *oufreq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *oufreq_version(void);

/**
 * Reference model (`f(s) = 2 + cos(2 pi s)`, `theta = 1`, `T = 10`) at noise
 * level `epsilon` with the largest stable step.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum OufreqStatus oufreq_model_new_reference(double epsilon, struct OufreqModel **out);

/**
 * Model from a JSON document with optional `model` and `signal` sections,
 * in the same format as the command-line configuration file.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OufreqStatus oufreq_model_from_json(const char *json, struct OufreqModel **out);

/**
 * # Safety
 * `model` must be a handle from this library or null.
 */
enum OufreqStatus oufreq_model_set_seed(struct OufreqModel *model, uint64_t seed);

/**
 * # Safety
 * `model` must be a handle from this library or null; it must not be used afterwards.
 */
void oufreq_model_free(struct OufreqModel *model);

/**
 * `I_0(theta)` for the model's horizon, `b` and signal.
 *
 * # Safety
 * `model` must be a valid handle and `out` writable.
 */
enum OufreqStatus oufreq_fisher_limit(const struct OufreqModel *model, double theta, double *out);

/**
 * Simulates one path with the model's seed.
 *
 * # Safety
 * `model` must be a valid handle and `out` writable.
 */
enum OufreqStatus oufreq_simulate(const struct OufreqModel *model, struct OufreqPath **out);

/**
 * Number of grid points `N + 1`; zero for a null handle.
 *
 * # Safety
 * `path` must be a valid handle or null.
 */
uintptr_t oufreq_path_len(const struct OufreqPath *path);

/**
 * Grid step `h`; NaN for a null handle.
 *
 * # Safety
 * `path` must be a valid handle or null.
 */
double oufreq_path_step(const struct OufreqPath *path);

/**
 * Copies the observed `X(t_i)` into `buf` (at least `oufreq_path_len` values).
 *
 * # Safety
 * `path` must be a valid handle and `buf` writable for `len` doubles.
 */
enum OufreqStatus oufreq_path_copy_x(const struct OufreqPath *path, double *buf, uintptr_t len);

/**
 * Copies the hidden `Y(t_i)` into `buf` (at least `oufreq_path_len` values).
 *
 * # Safety
 * `path` must be a valid handle and `buf` writable for `len` doubles.
 */
enum OufreqStatus oufreq_path_copy_y(const struct OufreqPath *path, double *buf, uintptr_t len);

/**
 * # Safety
 * `path` must be a handle from this library or null; it must not be used afterwards.
 */
void oufreq_path_free(struct OufreqPath *path);

/**
 * `ln V(theta)` for the path under the model's parameters. The path must have
 * been simulated on the model's grid.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum OufreqStatus oufreq_log_likelihood(const struct OufreqModel *model,
                                        const struct OufreqPath *path,
                                        double theta,
                                        double *out);

/**
 * Normalized score `Delta_eps(theta)`.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum OufreqStatus oufreq_score(const struct OufreqModel *model,
                               const struct OufreqPath *path,
                               double theta,
                               double *out);

/**
 * `eps I_eps(theta)`.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum OufreqStatus oufreq_fisher_eps(const struct OufreqModel *model,
                                    const struct OufreqPath *path,
                                    double theta,
                                    double *out);

/**
 * Maximum likelihood estimate over the model's parameter interval.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum OufreqStatus oufreq_mle(const struct OufreqModel *model,
                             const struct OufreqPath *path,
                             struct OufreqEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OUFREQ_H */
