#ifndef STEERSIM_H
#define STEERSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which qubit is steered: 0 for Charlie, 1 for the compressed `AB` qubit.
 */
#define STEERSIM_PARTY_CHARLIE 0

#define STEERSIM_PARTY_AB 1

typedef enum SteersimStatus {
  STEERSIM_STATUS_OK = 0,
  STEERSIM_STATUS_NULL_POINTER = 1,
  STEERSIM_STATUS_INVALID_ARGUMENT = 2,
  STEERSIM_STATUS_INVALID_STATE = 3,
  STEERSIM_STATUS_NOT_COMPRESSIBLE = 4,
  STEERSIM_STATUS_UNSUPPORTED = 5,
  STEERSIM_STATUS_DEGENERATE_STEERER = 6,
  STEERSIM_STATUS_AMBIGUOUS = 7,
  STEERSIM_STATUS_CONFIG = 8,
  STEERSIM_STATUS_INTERNAL = 9,
} SteersimStatus;

/**
 * Opaque three-qubit state plus the pair settings applied to it.
 */
typedef struct SteersimState SteersimState;

typedef struct SteersimEllipsoid {
  double center[3];
  /**
   * Row-major 3x3.
   */
  double matrix[9];
  /**
   * Descending.
   */
  double semiaxes[3];
  /**
   * Row `k` is the axis of `semiaxes[k]`.
   */
  double orientation[9];
  double volume;
} SteersimEllipsoid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *steersim_last_error(void);

/**
 * New GHZ state handle, or null on failure.
 */
struct SteersimState *steersim_state_ghz(void);

/**
 * # Safety
 * `state` must come from [`steersim_state_ghz`] and not be freed twice.
 */
void steersim_state_free(struct SteersimState *state);

/**
 * Applies one pair's averaged nonlocal measurement with strengths `lambdas[0..n]`.
 *
 * # Safety
 * `state` must be a live handle and `lambdas` must point to `n` doubles.
 */
enum SteersimStatus steersim_state_apply_nonlocal(struct SteersimState *state,
                                                  const double *lambdas,
                                                  size_t n);

/**
 * Applies one pair's local measurement, `A` with `etas`, `B` with `gammas`.
 *
 * # Safety
 * `state` must be a live handle; `etas` and `gammas` must point to `n` doubles.
 */
enum SteersimStatus steersim_state_apply_local(struct SteersimState *state,
                                               const double *etas,
                                               const double *gammas,
                                               size_t n);

/**
 * Steering functional of the current state for a pair with strengths `lambdas[0..n]`.
 *
 * # Safety
 * `state` must be a live handle, `lambdas` must point to `n` doubles and
 * `out` must be writable.
 */
enum SteersimStatus steersim_state_steering(const struct SteersimState *state,
                                            const double *lambdas,
                                            size_t n,
                                            double *out);

/**
 * Ellipsoid of the compressed current state; `party` is one of the
 * `STEERSIM_PARTY_*` constants.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum SteersimStatus steersim_state_ellipsoid(const struct SteersimState *state,
                                             int party,
                                             struct SteersimEllipsoid *out);

/**
 * Classical bound for a comma-separated axis list such as `"x,y"`.
 *
 * # Safety
 * `axes` must be a NUL-terminated string and `out` writable.
 */
enum SteersimStatus steersim_classical_bound(const char *axes, double *out);

/**
 * Closed-form steering value of pair `i` (1-based) for a two-setting
 * history. `lambdas` holds `pairs * 2` strengths, pair-major. `gammas` may
 * be null (then `γ = √λ`); `local` nonzero selects local measurements.
 *
 * # Safety
 * `lambdas` (and `gammas` unless null) must point to `pairs * 2` doubles;
 * `out` must be writable.
 */
enum SteersimStatus steersim_closed_form(const double *lambdas,
                                         const double *gammas,
                                         size_t pairs,
                                         size_t i,
                                         int local,
                                         double *out);

/**
 * Runs a JSON scenario and stores the JSON result in `*out`, to be released
 * with [`steersim_string_free`].
 *
 * # Safety
 * `config_json` must be NUL-terminated and `out` writable.
 */
enum SteersimStatus steersim_run_scenario(const char *config_json, char **out);

/**
 * # Safety
 * `s` must come from [`steersim_run_scenario`] or be null.
 */
void steersim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEERSIM_H */
