#ifndef EIGENPRISM_H
#define EIGENPRISM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum EpStatus {
  EP_STATUS_OK = 0,
  EP_STATUS_NULL_POINTER = 1,
  EP_STATUS_INVALID_INPUT = 2,
  EP_STATUS_DIMENSION_ERROR = 3,
  EP_STATUS_DIMENSION_MISMATCH = 4,
  EP_STATUS_NOT_POSITIVE_DEFINITE = 5,
  EP_STATUS_CONSTANT_COLUMN = 6,
  EP_STATUS_EMPTY_SPLIT = 7,
  EP_STATUS_SINGULAR_SYSTEM = 8,
  EP_STATUS_DEGENERATE_DUAL = 9,
  EP_STATUS_INVALID_CONSTRAINTS = 10,
  EP_STATUS_INVALID_ALPHA = 11,
  EP_STATUS_DEGENERATE_BOOTSTRAP = 12,
  EP_STATUS_ZERO_RESPONSE = 13,
  EP_STATUS_INVALID_GAMMA = 14,
  EP_STATUS_NORMALIZATION_ERROR = 15,
  EP_STATUS_INVALID_CORRELATION = 16,
  EP_STATUS_NON_FINITE = 17,
  EP_STATUS_NUMERICAL = 18,
  EP_STATUS_TRIAL_FAILURES = 19,
  EP_STATUS_IO = 20,
  EP_STATUS_PARSE = 21,
  EP_STATUS_PANIC = 99,
} EpStatus;

typedef enum EpTarget {
  EP_TARGET_THETA_SQUARED = 0,
  EP_TARGET_SIGMA_SQUARED = 1,
} EpTarget;

typedef enum EpEstimand {
  EP_ESTIMAND_THETA_SQUARED = 0,
  EP_ESTIMAND_SIGMA_SQUARED = 1,
  EP_ESTIMAND_SNR = 2,
  EP_ESTIMAND_REGRESSION_ERROR_L2 = 3,
} EpEstimand;

/**
 * Opaque spectral summary `(λ, z)` of a dataset.
 */
typedef struct EpSpectrum EpSpectrum;

/**
 * Estimator settings; start from [`ep_options_default`].
 */
typedef struct EpOptions {
  size_t zero_first;
  bool zero_last_if_null;
  double alpha;
  bool two_step;
} EpOptions;

/**
 * Confidence interval. `objective`, `delta` and `kkt_residual` are NaN when
 * the procedure has no weight solve (or no dual weight).
 */
typedef struct EpInterval {
  enum EpEstimand estimand;
  double point;
  double lower;
  double upper;
  double alpha;
  double sd_bound;
  double statistic;
  bool clipped_lower;
  bool clipped_upper;
  bool two_step_fallback;
  double objective;
  double delta;
  double kkt_residual;
} EpInterval;

/**
 * Certificates of a weight solve.
 */
typedef struct EpWeightInfo {
  double objective;
  double delta;
  double kappa1;
  double kappa2;
  double kkt_residual;
} EpWeightInfo;

typedef struct EpMpModel {
  double gamma;
  double support_lo;
  double support_hi;
  double median;
  double a;
  double b;
  double sd;
  double are_upper_bound;
} EpMpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty after success).
 * Valid until the next call on this thread.
 */
const char *ep_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ep_version(void);

struct EpOptions ep_options_default(void);

/**
 * Spectral summary of the `n × p` row-major design `x` with response `y`.
 */
enum EpStatus ep_spectrum_from_data(const double *x,
                                    const double *y,
                                    size_t n,
                                    size_t p,
                                    struct EpSpectrum **out);

/**
 * Spectral summary from precomputed eigenvalues of `XXᵀ/p` and `z = Uᵀy`.
 */
enum EpStatus ep_spectrum_from_parts(const double *lambda,
                                     const double *z,
                                     size_t n,
                                     size_t p,
                                     struct EpSpectrum **out);

void ep_spectrum_free(struct EpSpectrum *spec);

/**
 * Number of observations, or 0 for a null handle.
 */
size_t ep_spectrum_n(const struct EpSpectrum *spec);

/**
 * Copies the eigenvalues (non-increasing) into `out`, which holds `len` values.
 */
enum EpStatus ep_spectrum_lambda(const struct EpSpectrum *spec, double *out, size_t len);

/**
 * EigenPrism interval for θ² or σ².
 */
enum EpStatus ep_estimate(const struct EpSpectrum *spec,
                          enum EpTarget target,
                          const struct EpOptions *opts,
                          struct EpInterval *out);

/**
 * Interval for the signal fraction θ²/(θ²+σ²).
 */
enum EpStatus ep_snr(const struct EpSpectrum *spec,
                     const struct EpOptions *opts,
                     struct EpInterval *out);

/**
 * Exact χ² interval for θ² with known σ².
 */
enum EpStatus ep_t1(const double *y, size_t n, double sigma2, double alpha, struct EpInterval *out);

/**
 * BCa bootstrap interval for θ² with known σ² (`replicates >= 1000`).
 */
enum EpStatus ep_bootstrap_t1(const double *y,
                              size_t n,
                              double sigma2,
                              double alpha,
                              size_t replicates,
                              uint64_t seed,
                              struct EpInterval *out);

/**
 * Min-max weights for the spectrum `lambda` (length `n`, non-increasing),
 * with the first `zero_first` and last `zero_last` weights pinned to zero.
 * `w` receives `n` weights.
 */
enum EpStatus ep_solve_weights(const double *lambda,
                               size_t n,
                               enum EpTarget target,
                               size_t zero_first,
                               size_t zero_last,
                               double *w,
                               struct EpWeightInfo *info);

/**
 * Marčenko–Pastur constants for ratio `gamma` in (0, 1).
 */
enum EpStatus ep_mp_model(double gamma, struct EpMpModel *out);

/**
 * `P(|N(0,1)| ≤ z*·W/n)` with `W ~ χ²ₙ`.
 */
enum EpStatus ep_chi2_width_adjustment_coverage(size_t n, double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIGENPRISM_H */
