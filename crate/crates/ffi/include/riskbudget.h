#ifndef RISKBUDGET_H
#define RISKBUDGET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RbAlgorithm {
  RB_ALGORITHM_CCD = 0,
  RB_ALGORITHM_NEWTON = 1,
  RB_ALGORITHM_JACOBI = 2,
} RbAlgorithm;

typedef enum RbStatus {
  RB_STATUS_OK = 0,
  RB_STATUS_NULL_POINTER = 1,
  RB_STATUS_INVALID_INPUT = 2,
  RB_STATUS_NOT_POSITIVE_DEFINITE = 3,
  RB_STATUS_DOMAIN = 4,
  RB_STATUS_NUMERIC = 5,
  RB_STATUS_PANIC = 6,
} RbStatus;

typedef enum RbTermination {
  RB_TERMINATION_CONVERGED = 0,
  RB_TERMINATION_BUDGET_EXHAUSTED = 1,
  RB_TERMINATION_STALLED = 2,
  RB_TERMINATION_NON_POSITIVE_BETA = 3,
  RB_TERMINATION_NON_POSITIVE_RISK = 4,
  RB_TERMINATION_NUMERIC_FAILURE = 5,
} RbTermination;

/**
 * Opaque covariance model handle. Free with [`rb_model_free`].
 */
typedef struct RbModel RbModel;

/**
 * Summary of one solve. Weights are written to a separate caller buffer.
 */
typedef struct RbSolveResult {
  enum RbAlgorithm algorithm;
  /**
   * 1 when the convergence gap reached the tolerance, else 0.
   */
  int32_t converged;
  enum RbTermination termination;
  size_t cycles;
  double elapsed_seconds;
  double final_gap;
} RbSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model from a row-major `n * n` covariance matrix.
 *
 * # Safety
 * `cov` must point to `n * n` doubles; `out` must be a valid pointer.
 */
enum RbStatus rb_model_from_covariance(const double *cov, size_t n, struct RbModel **out);

/**
 * Builds a model from a row-major `n * n` correlation matrix and `n`
 * volatilities.
 *
 * # Safety
 * `corr` must point to `n * n` doubles, `vols` to `n`; `out` must be valid.
 */
enum RbStatus rb_model_from_correlation(const double *corr,
                                        const double *vols,
                                        size_t n,
                                        struct RbModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle returned by this library, freed once.
 */
void rb_model_free(struct RbModel *model);

/**
 * Number of assets, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t rb_model_dim(const struct RbModel *model);

/**
 * Solves for risk-budgeting weights under the volatility measure.
 *
 * `budgets` may be null for equal risk contributions; otherwise it holds `n`
 * positive values, rescaled to sum to one. Non-convergence is not an error:
 * the status is `RB_STATUS_OK` and `result_out->converged` is 0.
 * `algorithm` is one of the `RB_ALGORITHM_*` values.
 *
 * # Safety
 * `model` must be a live handle, `budgets` null or `n` doubles,
 * `weights_out` room for `n` doubles, `result_out` a valid pointer.
 */
enum RbStatus rb_solve(const struct RbModel *model,
                       const double *budgets,
                       int32_t algorithm,
                       double tolerance,
                       size_t max_cycles,
                       double *weights_out,
                       struct RbSolveResult *result_out);

/**
 * Coordinate descent under the measure `-xᵀμ + c·σ(x)`.
 *
 * # Safety
 * As [`rb_solve`]; `mu` must point to `n` doubles.
 */
enum RbStatus rb_solve_stddev(const struct RbModel *model,
                              const double *budgets,
                              const double *mu,
                              double c,
                              double tolerance,
                              size_t max_cycles,
                              double *weights_out,
                              struct RbSolveResult *result_out);

/**
 * Normalized volatility risk contributions of `weights`.
 *
 * # Safety
 * `model` must be a live handle; `weights` and `out` must hold `n` doubles.
 */
enum RbStatus rb_risk_contributions(const struct RbModel *model,
                                    const double *weights,
                                    double *out);

/**
 * Writes a seeded random correlation matrix with eigenvalues `2i/(n+1)`,
 * row-major, into `out`.
 *
 * # Safety
 * `out` must have room for `n * n` doubles.
 */
enum RbStatus rb_generate_correlation(size_t n, uint64_t seed, double *out);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *rb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKBUDGET_H */
