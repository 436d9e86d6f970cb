#ifndef GMIB_H
#define GMIB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GmibStatus {
  GMIB_STATUS_OK = 0,
  GMIB_STATUS_NULL_POINTER = 1,
  GMIB_STATUS_INVALID_ARGUMENT = 2,
  GMIB_STATUS_NO_ROOT = 3,
  GMIB_STATUS_OUT_OF_RANGE = 4,
  GMIB_STATUS_ALLOCATION = 5,
  GMIB_STATUS_CONTRACT_VIOLATION = 6,
  GMIB_STATUS_SINGULAR_FIT = 7,
  GMIB_STATUS_PANIC = 8,
} GmibStatus;

typedef enum GmibFeeStructure {
  GMIB_FEE_STRUCTURE_F1 = 0,
  GMIB_FEE_STRUCTURE_F2 = 1,
} GmibFeeStructure;

typedef enum GmibAnnuityTiming {
  GMIB_ANNUITY_TIMING_DUE = 0,
  GMIB_ANNUITY_TIMING_IMMEDIATE = 1,
} GmibAnnuityTiming;

typedef enum GmibBbRateMode {
  GMIB_BB_RATE_MODE_EXTENSION = 0,
  GMIB_BB_RATE_MODE_CONTRACT = 1,
} GmibBbRateMode;

typedef enum GmibCriticalStatus {
  GMIB_CRITICAL_STATUS_FOUND = 0,
  GMIB_CRITICAL_STATUS_BELOW_RANGE = 1,
  GMIB_CRITICAL_STATUS_ABOVE_RANGE = 2,
} GmibCriticalStatus;

/**
 * Contract, market and simulation plan for repeated valuations.
 */
typedef struct GmibModel GmibModel;

typedef struct GmibContractParams {
  double premium;
  uint32_t horizon;
  double roll_up_rate;
  double payment_rate;
  double fee_rate;
  enum GmibFeeStructure fee_structure;
  uint32_t annuity_term;
  enum GmibAnnuityTiming annuity_timing;
} GmibContractParams;

typedef struct GmibMarketParams {
  double rate;
  double sigma;
} GmibMarketParams;

typedef struct GmibSimParams {
  size_t n_paths;
  uint64_t seed;
  size_t n_workers;
  bool antithetic;
} GmibSimParams;

typedef struct GmibValuation {
  double estimate;
  double std_error;
  size_t n_paths;
} GmibValuation;

typedef struct GmibFairRate {
  double g_star;
  double bracket_low;
  double bracket_high;
  double residual;
  uint32_t iterations;
} GmibFairRate;

typedef struct GmibCriticalRate {
  /**
   * NaN unless `status` is `GMIB_CRITICAL_STATUS_FOUND`.
   */
  double r_star;
  enum GmibCriticalStatus status;
  double d_low;
  double d_high;
  uint32_t iterations;
  bool strictly_increasing;
} GmibCriticalRate;

typedef struct GmibPolyFitStats {
  double r_squared;
  double adjusted_r_squared;
  double residual_sum_squares;
  size_t n_points;
} GmibPolyFitStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fills `out` with the baseline contract (S0 = 100000, T = 20, r_g = 5%,
 * g = 6.5%, c = 0.7%, F1, 20-year annuity-due).
 */
enum GmibStatus gmib_contract_defaults(struct GmibContractParams *out);

enum GmibStatus gmib_market_defaults(struct GmibMarketParams *out);

enum GmibStatus gmib_sim_defaults(struct GmibSimParams *out);

/**
 * Validates the parameters and allocates a model handle into `*out`.
 *
 * # Safety
 * Non-null pointers must be valid for reads (params) or writes (`out`).
 */
enum GmibStatus gmib_model_new(const struct GmibContractParams *contract,
                               const struct GmibMarketParams *market,
                               const struct GmibSimParams *sim,
                               struct GmibModel **out);

/**
 * Releases a handle from [`gmib_model_new`]. NULL is ignored.
 *
 * # Safety
 * `model` must come from [`gmib_model_new`] and not have been freed.
 */
void gmib_model_free(struct GmibModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
enum GmibStatus gmib_model_set_payment_rate(struct GmibModel *model, double g);

/**
 * # Safety
 * `model` must be a live handle.
 */
enum GmibStatus gmib_model_set_fee_rate(struct GmibModel *model, double c);

/**
 * Present value of `n_payments` annual payments of 1.
 *
 * # Safety
 * `out` must be writable.
 */
enum GmibStatus gmib_annuity_factor(double rate,
                                    uint32_t n_payments,
                                    enum GmibAnnuityTiming timing_kind,
                                    double *out);

/**
 * Benefit base at the horizon, valued at the contract rate.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GmibStatus gmib_benefit_base(const struct GmibModel *model, double *out);

/**
 * Closed-form mean of the unfloored terminal account.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GmibStatus gmib_expected_terminal_mean(const struct GmibModel *model, double *out);

/**
 * Writes the `n_paths` terminal account values into `values`.
 * `len` must equal the model's path count.
 *
 * # Safety
 * `values` must hold `len` writable doubles; `floored` may be NULL.
 */
enum GmibStatus gmib_terminal_sample(const struct GmibModel *model,
                                     double *values,
                                     size_t len,
                                     size_t *floored);

/**
 * Monte Carlo value of the rider, `E[(1 + r)^{-T} max(BB, S_f)]`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GmibStatus gmib_price(const struct GmibModel *model, struct GmibValuation *out);

/**
 * Probability that the benefit base is at least the account at the horizon.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GmibStatus gmib_exercise_probability(const struct GmibModel *model, struct GmibValuation *out);

/**
 * Fair payment rate for the model's fee rate, searching from
 * `[low, high]` with bracket width `tolerance_g`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GmibStatus gmib_fair_rate(const struct GmibModel *model,
                               double low,
                               double high,
                               double tolerance_g,
                               struct GmibFairRate *out);

/**
 * Critical extension-year rate. `grid` may be NULL for the default
 * `0.00..=0.15` grid. An out-of-range result still fills `out` and
 * returns `GMIB_STATUS_OUT_OF_RANGE`.
 *
 * # Safety
 * `grid` must hold `grid_len` doubles when non-null; `out` writable.
 */
enum GmibStatus gmib_critical_rate(const struct GmibModel *model,
                                   const double *grid,
                                   size_t grid_len,
                                   enum GmibBbRateMode bb_rate_mode,
                                   bool charge_extension_fees,
                                   struct GmibCriticalRate *out);

/**
 * Least-squares polynomial of `degree`. Coefficients are written highest
 * power first into `coefficients`, which must hold `degree + 1` values.
 *
 * # Safety
 * `xs` and `ys` must hold `n` doubles; `coefficients` `coefficients_len`
 * writable doubles; `stats` may be NULL.
 */
enum GmibStatus gmib_fit_polynomial(const double *xs,
                                    const double *ys,
                                    size_t n,
                                    size_t degree,
                                    double *coefficients,
                                    size_t coefficients_len,
                                    struct GmibPolyFitStats *stats);

/**
 * Nested-model F-test p-value for `high_degree` against `low_degree`.
 *
 * # Safety
 * `xs` and `ys` must hold `n` doubles; `p_value` writable; `degenerate`
 * may be NULL.
 */
enum GmibStatus gmib_nested_f_test(const double *xs,
                                   const double *ys,
                                   size_t n,
                                   size_t low_degree,
                                   size_t high_degree,
                                   double *p_value,
                                   bool *degenerate);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the full message length plus
 * one. Returns 0 when there is no error.
 *
 * # Safety
 * `buf` must hold `len` writable bytes, or be NULL with `len == 0`.
 */
size_t gmib_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gmib_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GMIB_H */
