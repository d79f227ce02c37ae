#ifndef PILOTWAVE_H
#define PILOTWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PwStatus {
  PW_STATUS_OK = 0,
  PW_STATUS_NULL_POINTER = 1,
  PW_STATUS_INVALID_ARGUMENT = 2,
  PW_STATUS_NUMERICAL = 3,
  PW_STATUS_OUT_OF_RANGE = 4,
  PW_STATUS_PANIC = 5,
} PwStatus;

typedef enum PwOutcome {
  PW_OUTCOME_LEFT = 0,
  PW_OUTCOME_RIGHT = 1,
  PW_OUTCOME_BOTH = 2,
  PW_OUTCOME_NEITHER = 3,
  PW_OUTCOME_AMBIGUOUS = 4,
} PwOutcome;

/**
 * Opaque pair trajectory.
 */
typedef struct PwTrajectory PwTrajectory;

/**
 * Experiment parameters in code units.
 */
typedef struct PwExperimentConfig {
  double a;
  double p;
  double m;
  double l;
  double t_final;
  double dt;
} PwExperimentConfig;

/**
 * Position of the other particle at time `t`; write it to `out` and
 * return `true`, or return `false` when `t` is not covered.
 */
typedef bool (*PwPositionFn)(double t, void *user, double *out);

/**
 * One sample of a pair trajectory.
 */
typedef struct PwSample {
  double t;
  double u;
  double v;
  double u_dot;
  double v_dot;
} PwSample;

typedef struct PwEnsembleStats {
  uint64_t n;
  double frac_left;
  double frac_right;
  double frac_both;
  double frac_neither;
  double frac_ambiguous;
  double wrong_fraction;
  uint64_t rng_seed;
} PwEnsembleStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t pw_last_error(char *buf, size_t len);

struct PwExperimentConfig pw_experiment_config_default(void);

/**
 * Instantaneous reduced velocities at `(u, v, t)`.
 *
 * # Safety
 * Output pointers must be null or valid for writes.
 */
enum PwStatus pw_pair_velocity(double u, double v, double t, double *u_dot, double *v_dot);

/**
 * Residual of the closed-form implicit solution for `u(t)`.
 *
 * # Safety
 * `out` must be null or valid for a write.
 */
enum PwStatus pw_implicit_residual(double u, double t, double u0, double v0, double *out);

enum PwOutcome pw_classify(double final_u_dot, double final_v_dot);

/**
 * Dimensionless wrongness parameter `l ħ / (m c λ d)` in SI units.
 *
 * # Safety
 * `out` must be null or valid for a write.
 */
enum PwStatus pw_wrongness_parameter(double l,
                                     double m,
                                     double d,
                                     double lambda,
                                     double hbar,
                                     double c,
                                     double *out);

/**
 * Emission time on the light cone of `(t_i, x_i)` for a source whose
 * position is given by `other`.
 *
 * # Safety
 * `out` must be null or valid for a write; `other` is called with `user`.
 */
enum PwStatus pw_retarded_time(double t_i,
                               double x_i,
                               PwPositionFn other,
                               void *user,
                               double c,
                               double *out);

/**
 * Integrates the instantaneous pair equations from `(u0, v0)`.
 *
 * # Safety
 * `cfg` must be null or valid; `out` must be null or valid for a write.
 * The handle written to `out` must be released with `pw_trajectory_free`.
 */
enum PwStatus pw_integrate_pair(const struct PwExperimentConfig *cfg,
                                double u0,
                                double v0,
                                struct PwTrajectory **out);

/**
 * Integrates the retarded pair equations with delay `delay`.
 *
 * # Safety
 * As for [`pw_integrate_pair`].
 */
enum PwStatus pw_integrate_retarded(const struct PwExperimentConfig *cfg,
                                    double delay,
                                    double u0,
                                    double v0,
                                    struct PwTrajectory **out);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `tr` must be null or a live handle.
 */
size_t pw_trajectory_len(const struct PwTrajectory *tr);

/**
 * Sample `index` of the trajectory.
 *
 * # Safety
 * `tr` must be null or a live handle; `out` null or valid for a write.
 */
enum PwStatus pw_trajectory_get(const struct PwTrajectory *tr, size_t index, struct PwSample *out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `tr` must be null or a handle not yet freed.
 */
void pw_trajectory_free(struct PwTrajectory *tr);

/**
 * Born-sampled ensemble with the instantaneous law.
 *
 * # Safety
 * `cfg` must be null or valid; `out` null or valid for a write.
 */
enum PwStatus pw_run_nonretarded_ensemble(const struct PwExperimentConfig *cfg,
                                          size_t n,
                                          uint64_t seed,
                                          struct PwEnsembleStats *out);

/**
 * Born-sampled ensemble with the retarded law.
 *
 * # Safety
 * As for [`pw_run_nonretarded_ensemble`].
 */
enum PwStatus pw_run_retarded_ensemble(const struct PwExperimentConfig *cfg,
                                       double delay,
                                       size_t n,
                                       uint64_t seed,
                                       struct PwEnsembleStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PILOTWAVE_H */
