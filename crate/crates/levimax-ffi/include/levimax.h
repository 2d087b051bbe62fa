#ifndef LEVIMAX_H
#define LEVIMAX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible entry point.
 */
typedef enum LevimaxStatus {
  /**
   * The call succeeded.
   */
  LevimaxStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  LevimaxStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LevimaxStatus_InvalidUtf8 = 2,
  /**
   * An expression or scenario failed to parse or validate.
   */
  LevimaxStatus_Parse = 3,
  /**
   * Arguments were outside the function's domain (dimension
   * mismatches, non-positive widths, and similar).
   */
  LevimaxStatus_Domain = 4,
  /**
   * An iterative solver failed to converge.
   */
  LevimaxStatus_Solver = 5,
  /**
   * A theorem hypothesis does not hold, so the requested check is
   * inapplicable to the input.
   */
  LevimaxStatus_Hypothesis = 6,
  /**
   * The library panicked; this indicates a bug.
   */
  LevimaxStatus_Internal = 7,
} LevimaxStatus;

/**
 * Checks runnable through [`levimax_scenario_run`].
 */
typedef enum LevimaxCheck {
  /**
   * Sandwich estimate between two fields on the scenario grid.
   */
  LevimaxCheck_Estimate = 0,
  /**
   * Hessian lower bound for the smoothed maximum on the grid.
   */
  LevimaxCheck_HessianBound = 1,
} LevimaxCheck;

/**
 * Opaque handle to a parsed scalar field on R^{2n}.
 */
typedef struct LevimaxField LevimaxField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null if
 * no failure has been recorded. The pointer stays valid until the next
 * failing call on the same thread; do not free it.
 */
const char *levimax_last_error(void);

/**
 * Parse `source` as a scalar field in the variables `x1..x_{2n}` and
 * store a handle in `out`.
 *
 * # Safety
 *
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LevimaxStatus levimax_field_parse(const char *source, uintptr_t n, struct LevimaxField **out);

/**
 * Evaluate the field at `point` (an array of `len` reals) into `out`.
 *
 * # Safety
 *
 * `field`, `point` (with `len` readable elements) and `out` must be valid.
 */
enum LevimaxStatus levimax_field_eval(const struct LevimaxField *field,
                                      const double *point,
                                      uintptr_t len,
                                      double *out);

/**
 * Evaluate the gradient of the field at `point` into `out` (also `len`
 * elements).
 *
 * # Safety
 *
 * `field`, `point` and `out` must be valid for `len` elements.
 */
enum LevimaxStatus levimax_field_gradient(const struct LevimaxField *field,
                                          const double *point,
                                          uintptr_t len,
                                          double *out);

/**
 * Release a field handle. Null is ignored.
 *
 * # Safety
 *
 * `field` must have come from [`levimax_field_parse`] and not be freed twice.
 */
void levimax_field_free(struct LevimaxField *field);

/**
 * Evaluate the regularized maximum of `t[0..k]` with widths
 * `theta[0..k]` into `out`.
 *
 * # Safety
 *
 * `t` and `theta` must be readable for `k` elements and `out` valid.
 */
enum LevimaxStatus levimax_regmax_eval(const double *t,
                                       const double *theta,
                                       uintptr_t k,
                                       double *out);

/**
 * Evaluate the gradient of the regularized maximum into `out[0..k]`.
 *
 * # Safety
 *
 * `t`, `theta` and `out` must all be valid for `k` elements.
 */
enum LevimaxStatus levimax_regmax_grad(const double *t,
                                       const double *theta,
                                       uintptr_t k,
                                       double *out);

/**
 * Run a verification check on a scenario given as a JSON document and
 * store the JSON report in `out_report`. The report must be released
 * with [`levimax_string_free`]. A failing check still returns
 * `Ok`; inspect the `pass` flag inside the report.
 *
 * # Safety
 *
 * `scenario_json` must be a NUL-terminated string and `out_report` valid.
 */
enum LevimaxStatus levimax_scenario_run(const char *scenario_json,
                                        enum LevimaxCheck check,
                                        char **out_report);

/**
 * Release a string returned by the library. Null is ignored.
 *
 * # Safety
 *
 * `s` must have been returned by this library and not be freed twice.
 */
void levimax_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVIMAX_H */
