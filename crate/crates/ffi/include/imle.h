#ifndef IMLE_H
#define IMLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum ImleStatus {
  IMLE_STATUS_OK = 0,
  IMLE_STATUS_NULL_POINTER = 1,
  IMLE_STATUS_INVALID_ARGUMENT = 2,
  IMLE_STATUS_NUMERIC = 3,
  IMLE_STATUS_IO = 4,
  IMLE_STATUS_PANIC = 5,
} ImleStatus;

typedef enum ImleMultMode {
  IMLE_MULT_MODE_VIME = 0,
  IMLE_MULT_MODE_IMLE = 1,
} ImleMultMode;

/**
 * Bayesian linear dynamics model handle with its own generator.
 */
typedef struct ImleBnn ImleBnn;

/**
 * Sparse-reward environment handle.
 */
typedef struct ImleEnv ImleEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *imle_last_error(void);

/**
 * Creates an environment by name (`sparse-mountaincar` or `sparse-acrobot`).
 * `horizon = 0` selects the task default.
 *
 * # Safety
 * `name` must be a valid C string and `out` a valid pointer.
 */
enum ImleStatus imle_env_new(const char *name, size_t horizon, struct ImleEnv **out);

/**
 * # Safety
 * `env` must come from [`imle_env_new`] and not be used afterwards.
 */
void imle_env_free(struct ImleEnv *env);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ImleStatus imle_env_obs_dim(struct ImleEnv *env, size_t *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ImleStatus imle_env_action_dim(struct ImleEnv *env, size_t *out);

/**
 * Starts a new episode and writes the first observation.
 *
 * # Safety
 * `obs` must point to `obs_len` writable doubles.
 */
enum ImleStatus imle_env_reset(struct ImleEnv *env, uint64_t seed, double *obs, size_t obs_len);

/**
 * Applies `action` (clipped to [-1, 1]) and writes the next observation,
 * the reward and the episode-end flag.
 *
 * # Safety
 * Buffers must hold the stated lengths; `reward` and `done` must be valid.
 */
enum ImleStatus imle_env_step(struct ImleEnv *env,
                              const double *action,
                              size_t action_len,
                              double *obs,
                              size_t obs_len,
                              double *reward,
                              bool *done);

/**
 * `KL(p ‖ q)` between diagonal Gaussians given by means and variances.
 *
 * # Safety
 * The four arrays must hold `len` doubles; `out` must be valid.
 */
enum ImleStatus imle_kl_diag_gauss(const double *mean_p,
                                   const double *var_p,
                                   const double *mean_q,
                                   const double *var_q,
                                   size_t len,
                                   double *out);

/**
 * Multiplications per scored transition. `latent = 0` uses the last hidden width.
 *
 * # Safety
 * `hidden` must hold `n_hidden` values; `out` must be valid.
 */
enum ImleStatus imle_mult_count(size_t state,
                                size_t action,
                                const size_t *hidden,
                                size_t n_hidden,
                                size_t latent,
                                size_t samples,
                                enum ImleMultMode mode,
                                uint64_t *out);

/**
 * Runs a training configuration given as flat JSON. A non-null `out_dir`
 * overrides the config's output directory.
 *
 * # Safety
 * `config_json` must be a valid C string; `out_dir` null or a valid C string.
 */
enum ImleStatus imle_train(const char *config_json, const char *out_dir);

/**
 * Creates a Bayesian linear model `in_dim → out_dim`.
 *
 * # Safety
 * `out` must be valid.
 */
enum ImleStatus imle_bnn_new(size_t in_dim,
                             size_t out_dim,
                             double prior_std,
                             double obs_std,
                             double init_std,
                             uint64_t seed,
                             struct ImleBnn **out);

/**
 * # Safety
 * `bnn` must come from [`imle_bnn_new`] and not be used afterwards.
 */
void imle_bnn_free(struct ImleBnn *bnn);

/**
 * Predictive mean and variance (observation noise included) of the output.
 *
 * # Safety
 * `x` holds `x_len` doubles; `mean` and `var` hold `out_len` each.
 */
enum ImleStatus imle_bnn_predict(struct ImleBnn *bnn,
                                 const double *x,
                                 size_t x_len,
                                 double *mean,
                                 double *var,
                                 size_t out_len);

/**
 * Information gain of one transition `(x, y)` for a step of size `step`,
 * with the prior weighted by `1 / dataset_size`.
 *
 * # Safety
 * `x` and `y` hold the stated lengths; `out` must be valid.
 */
enum ImleStatus imle_bnn_info_gain(struct ImleBnn *bnn,
                                   const double *x,
                                   size_t x_len,
                                   const double *y,
                                   size_t y_len,
                                   double step,
                                   size_t dataset_size,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMLE_H */
