#ifndef MIXACT_H
#define MIXACT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MixactStatus {
  MIXACT_STATUS_OK = 0,
  MIXACT_STATUS_INVALID_ARGUMENT = 1,
  MIXACT_STATUS_INVALID_POINT = 2,
  MIXACT_STATUS_DUPLICATE_POINT = 3,
  MIXACT_STATUS_FIT_FAILURE = 4,
  MIXACT_STATUS_FACTORIZATION_FAILURE = 5,
  MIXACT_STATUS_EMPTY_CONTOUR = 6,
  MIXACT_STATUS_IO = 7,
  MIXACT_STATUS_NULL_POINTER = 8,
  MIXACT_STATUS_PANIC = 9,
} MixactStatus;

// Criterion codes for [`MixactSpec`].
typedef enum MixactCriterion {
  MIXACT_CRITERION_EI = 0,
  MIXACT_CRITERION_LCB = 1,
  MIXACT_CRITERION_UCB = 2,
  MIXACT_CRITERION_ARSD = 3,
  MIXACT_CRITERION_EI_C = 4,
  MIXACT_CRITERION_ECL = 5,
  MIXACT_CRITERION_RCC = 6,
  MIXACT_CRITERION_ARSD_C = 7,
  MIXACT_CRITERION_LCB_C = 8,
  MIXACT_CRITERION_EI_MC = 9,
  MIXACT_CRITERION_EI_SC = 10,
} MixactCriterion;

typedef struct MixactDataset MixactDataset;

typedef struct MixactModel MixactModel;

typedef struct MixactSpace MixactSpace;

// Selection parameters; start from [`mixact_spec_default`]. `a` is
// ignored by criteria that do not target a contour.
typedef struct MixactSpec {
  enum MixactCriterion kind;
  double a;
  double rho;
  double alpha_conf;
  double alpha_eps;
  double delta;
  size_t n_contours;
} MixactSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. Valid until the
// next failing call on the same thread.
const char *mixact_last_error(void);

// # Safety
// `levels` points to `q` level counts (may be null when `q == 0`); `out`
// is writable.
enum MixactStatus mixact_space_new(size_t p,
                                   const uint32_t *levels,
                                   size_t q,
                                   struct MixactSpace **out);

// # Safety
// `space` is null or a handle from `mixact_space_new` not yet freed.
void mixact_space_free(struct MixactSpace *space);

// Number of level combinations, or 0 for a null handle.
//
// # Safety
// `space` is null or a live handle.
size_t mixact_space_combinations(const struct MixactSpace *space);

// # Safety
// `space` is a live handle; `out` is writable.
enum MixactStatus mixact_dataset_new(const struct MixactSpace *space, struct MixactDataset **out);

// Appends one observation; rejects invalid, non-finite or repeated points.
//
// # Safety
// `data` is a live handle; `x` holds `p` values and `z` holds `q` levels.
enum MixactStatus mixact_dataset_push(struct MixactDataset *data,
                                      const double *x,
                                      const uint32_t *z,
                                      double y);

// # Safety
// `data` is null or a live handle.
size_t mixact_dataset_len(const struct MixactDataset *data);

// # Safety
// `data` is null or a live handle not yet freed.
void mixact_dataset_free(struct MixactDataset *data);

// Fits the EzGP emulator by multi-start maximum likelihood.
//
// # Safety
// `data` is a live handle; `out` is writable.
enum MixactStatus mixact_model_fit(const struct MixactDataset *data,
                                   uint64_t seed,
                                   struct MixactModel **out);

// Predictive mean and standard deviation at `n` points.
//
// # Safety
// `model` is a live handle; `x` holds `n * p` values, `z` holds `n * q`
// levels; `mean` and `sd` have room for `n` values.
enum MixactStatus mixact_model_predict(const struct MixactModel *model,
                                       size_t n,
                                       const double *x,
                                       const uint32_t *z,
                                       double *mean,
                                       double *sd);

// # Safety
// `model` is null or a live handle.
double mixact_model_log_likelihood(const struct MixactModel *model);

// Serializes the model to JSON; release the string with
// [`mixact_string_free`].
//
// # Safety
// `model` is a live handle; `out` is writable.
enum MixactStatus mixact_model_to_json(const struct MixactModel *model, char **out);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum MixactStatus mixact_model_from_json(const char *json, struct MixactModel **out);

// # Safety
// `model` is null or a live handle not yet freed.
void mixact_model_free(struct MixactModel *model);

// # Safety
// `s` is null or a string returned by this library not yet freed.
void mixact_string_free(char *s);

double mixact_ei_min(double mean, double sd, double f_min);

double mixact_lcb(double mean, double sd, double rho);

double mixact_ucb(double mean, double sd, double rho);

double mixact_beta0n(size_t n, size_t m, double alpha_conf);

double mixact_ei_contour(double mean, double sd, double a, double alpha_eps);

double mixact_ecl(double mean, double sd, double a);

// # Safety
// `levels` holds `c` values.
double mixact_ei_mc(double mean, double sd, const double *levels, size_t c, double alpha_eps);

struct MixactSpec mixact_spec_default(enum MixactCriterion kind);

// Scores `n` candidates under `spec` and writes the winning index and its
// score.
//
// # Safety
// `model` and `spec` are valid; `x`/`z` hold `n` points; `index` and
// `score` are writable.
enum MixactStatus mixact_select(const struct MixactModel *model,
                                const struct MixactSpec *spec,
                                size_t n,
                                const double *x,
                                const uint32_t *z,
                                uint64_t seed,
                                size_t *index,
                                double *score);

// Selection from precomputed posteriors (no model needed). `f_min`, `n`
// and `m` feed EI and the confidence schedule. EI-MC requires
// `spec.n_contours` levels in `levels`.
//
// # Safety
// `mean`, `sd` hold `count` values; `levels` holds `spec.n_contours`
// values for EI-MC; `index` and `score` are writable.
enum MixactStatus mixact_select_posteriors(const struct MixactSpec *spec,
                                           size_t count,
                                           const double *mean,
                                           const double *sd,
                                           double f_min,
                                           size_t n,
                                           size_t m,
                                           const double *levels,
                                           size_t *index,
                                           double *score);

// Evaluates built-in test problem `which` (1, 2 or 3) at one point.
//
// # Safety
// `x`/`z` hold one point of that problem's dimensions; `y` is writable.
enum MixactStatus mixact_example_eval(uint32_t which,
                                      const double *x,
                                      const uint32_t *z,
                                      double *y);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXACT_H */
