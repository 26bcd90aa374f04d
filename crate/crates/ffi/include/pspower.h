/* C interface to the pspower design engine. */

#ifndef PSPOWER_H
#define PSPOWER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum PspowerStatus {
  PSPOWER_STATUS_OK = 0,
  /**
   * Invalid argument or parameter outside its domain.
   */
  PSPOWER_STATUS_DOMAIN = 1,
  /**
   * Requested overlap below the attainable minimum for this r.
   */
  PSPOWER_STATUS_INFEASIBLE_OVERLAP = 2,
  /**
   * Summary inputs are mutually inconsistent.
   */
  PSPOWER_STATUS_INCONSISTENT = 3,
  /**
   * rho2 exceeds the declared R^2 bound.
   */
  PSPOWER_STATUS_RHO_BOUND = 4,
  /**
   * Numerical routine failed to converge.
   */
  PSPOWER_STATUS_CONVERGENCE = 5,
  /**
   * A required pointer argument was null.
   */
  PSPOWER_STATUS_NULL_POINTER = 6,
} PspowerStatus;

/**
 * Opaque design handle; create with pspower_design_new, release with
 * pspower_design_free.
 */
typedef struct PspowerDesign PspowerDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a design handle for treatment proportion `r`, overlap `phi` and
 * standardized effect size `tau_std`, with defaults alpha = 0.05 (two
 * sided), target power 0.8, ATE estimand and rho2 = 0. Returns null on
 * invalid input (see pspower_last_error).
 */
struct PspowerDesign *pspower_design_new(double r, double phi, double tau_std);

/**
 * Releases a design handle; null is ignored.
 */
void pspower_design_free(struct PspowerDesign *design);

/**
 * Sets the test level; `two_sided` is 0 for one-sided, nonzero otherwise.
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_alpha(struct PspowerDesign *design,
                                            double alpha,
                                            int32_t two_sided);

/**
 * Sets the target power (in (0.5, 1)).
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_power(struct PspowerDesign *design, double power);

/**
 * Sets the confounder-outcome squared correlation rho2 in [0, 1).
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_rho2(struct PspowerDesign *design, double rho2);

/**
 * Sets the estimand: 0 = ATE, 1 = ATT, 2 = ATO.
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_estimand(struct PspowerDesign *design, int32_t estimand);

/**
 * Declares an R^2 upper bound for rho2; pass a negative value to clear it.
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_r2_bound(struct PspowerDesign *design, double r2);

/**
 * Supplies the estimated-score variance for the two-variance power form;
 * pass a non-positive value to clear it.
 *
 * # Safety
 * `design` must be a live handle from pspower_design_new.
 */
enum PspowerStatus pspower_design_set_v0(struct PspowerDesign *design, double v0);

/**
 * Minimal sample size for the configured design, written to `n_out`.
 *
 * # Safety
 * `design` must be a live handle; `n_out` must point to writable memory.
 */
enum PspowerStatus pspower_design_sample_size(const struct PspowerDesign *design, uint64_t *n_out);

/**
 * Power of the level-alpha test at sample size `n`, written to `power_out`.
 *
 * # Safety
 * `design` must be a live handle; `power_out` must point to writable memory.
 */
enum PspowerStatus pspower_design_power_at(const struct PspowerDesign *design,
                                           uint64_t n,
                                           double *power_out);

/**
 * Standardized variance decomposition (v_total = v_sh + rho2 * v_adj) for
 * the configured design. Any output pointer may be null to skip it.
 *
 * # Safety
 * `design` must be a live handle; non-null outputs must be writable.
 */
enum PspowerStatus pspower_design_variance(const struct PspowerDesign *design,
                                           double *v_total,
                                           double *v_sh,
                                           double *v_adj);

/**
 * Two-sample z-test sample size (the randomized-trial baseline), written
 * to `n_out`. `two_sided` is 0 for one-sided, nonzero otherwise.
 *
 * # Safety
 * `n_out` must point to writable memory.
 */
enum PspowerStatus pspower_ztest_size(double alpha,
                                      double power,
                                      double r,
                                      double tau_std,
                                      int32_t two_sided,
                                      uint64_t *n_out);

/**
 * Copies the last error message on this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, or 0 when no error has occurred.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes (or be null to query
 * the length only).
 */
uintptr_t pspower_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pspower_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSPOWER_H */
