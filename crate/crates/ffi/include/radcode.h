#ifndef RADCODE_H
#define RADCODE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  RC_STATUS_ILL_CONDITIONED = 3,
  RC_STATUS_DEGENERATE = 4,
  RC_STATUS_SOLVER_FAILURE = 5,
  RC_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  RC_STATUS_INTERNAL = 7,
} RcStatus;

typedef struct RcCode RcCode;

typedef struct RcResult RcResult;

typedef struct RcScenario RcScenario;

/**
 * Scenario description with an exponentially correlated interference covariance.
 */
typedef struct RcScenarioParams {
  size_t pulses;
  /**
   * Pulse repetition interval (s).
   */
  double pri;
  /**
   * Chirp bandwidth (Hz).
   */
  double bandwidth;
  /**
   * Pulse width (s).
   */
  double pulse_width;
  /**
   * Fast-time sampling step (s).
   */
  double sample_step;
  size_t fast_samples;
  double amplitude_power;
  double normalized_doppler;
  double pfa;
  /**
   * One-lag correlation coefficient of the interference.
   */
  double rho;
} RcScenarioParams;

/**
 * Scalar figures of merit of a synthesized code.
 */
typedef struct RcMetrics {
  double sinr_db;
  double crb_tau;
  double crb_fd;
  double det_crb;
  double pd;
  double papr;
  double isl_db;
  double upsilon_db;
  double objective_db;
  size_t iterations;
} RcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Defaults of the reference scenario.
 */
struct RcScenarioParams rc_scenario_params_default(void);

/**
 * Validate `params` and create a scenario handle in `*out`.
 *
 * # Safety
 * `params` must point to a valid `RcScenarioParams`; `out` must be writable.
 */
enum RcStatus rc_scenario_new(const struct RcScenarioParams *params, struct RcScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from `rc_scenario_new` not yet freed.
 */
void rc_scenario_free(struct RcScenario *scenario);

/**
 * Unit-energy P3 code of length `pulses`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_code_p3(size_t pulses, struct RcCode **out);

/**
 * Bundled length-32 generalized Barker code.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_code_generalized_barker(struct RcCode **out);

/**
 * Build a code from separate real and imaginary arrays, scaled to unit energy.
 *
 * # Safety
 * `re` and `im` must each point to `len` readable doubles; `out` must be writable.
 */
enum RcStatus rc_code_from_parts(const double *re,
                                 const double *im,
                                 size_t len,
                                 struct RcCode **out);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `code` must be null or a live code handle.
 */
size_t rc_code_len(const struct RcCode *code);

/**
 * Copy the entries into `re` and `im`, each of capacity `len`.
 *
 * # Safety
 * `code` must be a live code handle; `re` and `im` must each hold `len` doubles.
 */
enum RcStatus rc_code_copy(const struct RcCode *code, double *re, double *im, size_t len);

/**
 * # Safety
 * `code` must be null or a live code handle.
 */
void rc_code_free(struct RcCode *code);

/**
 * Design a code for weight `beta` and similarity radius `zeta` with default solver options.
 *
 * # Safety
 * `scenario` and `reference` must be live handles; `out` must be writable.
 */
enum RcStatus rc_synthesize(const struct RcScenario *scenario,
                            const struct RcCode *reference,
                            double beta,
                            double zeta,
                            struct RcResult **out);

/**
 * # Safety
 * `result` must be a live result handle; `out` must be writable.
 */
enum RcStatus rc_result_metrics(const struct RcResult *result, struct RcMetrics *out);

/**
 * New code handle holding the designed code.
 *
 * # Safety
 * `result` must be a live result handle; `out` must be writable.
 */
enum RcStatus rc_result_code(const struct RcResult *result, struct RcCode **out);

/**
 * # Safety
 * `result` must be null or a live result handle.
 */
void rc_result_free(struct RcResult *result);

/**
 * First-order Marcum Q function.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_marcum_q1(double a, double b, double *out);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated, truncated to
 * `len`). Returns the buffer size needed for the full message including the terminator.
 *
 * # Safety
 * `buf` must be null or hold `len` writable bytes.
 */
size_t rc_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RADCODE_H */
