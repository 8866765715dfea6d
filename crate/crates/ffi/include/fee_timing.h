#ifndef FEE_TIMING_H
#define FEE_TIMING_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; values match the command-line exit codes where they overlap.
 */
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_PARSE = 2,
  FT_STATUS_DOMAIN = 3,
  FT_STATUS_NUMERICAL = 4,
  FT_STATUS_NULL_POINTER = 5,
  FT_STATUS_INVALID_ARGUMENT = 6,
  FT_STATUS_INTERNAL = 7,
} FtStatus;

/**
 * Opaque scenario handle.
 */
typedef struct FtScenario FtScenario;

typedef struct FtDecision {
  double fee;
  double broadcast_time;
  double expected_utility;
  double inclusion_probability;
} FtDecision;

typedef struct FtReport {
  uint64_t trials;
  double mean_utility;
  double utility_stderr;
  double inclusion_rate;
  uint64_t seed;
} FtReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scenario from NUL-terminated TOML. On success `*out` owns a new
 * handle.
 *
 * # Safety
 * `toml` must be a valid C string and `out` a valid pointer.
 */
enum FtStatus ft_scenario_from_toml(const char *toml, struct FtScenario **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `scenario` must come from [`ft_scenario_from_toml`] and not be used again.
 */
void ft_scenario_free(struct FtScenario *scenario);

/**
 * Last error message on this thread, or null. Valid until the next call
 * into this library from the same thread.
 */
const char *ft_last_error(void);

/**
 * Best fee posted now without looking at the pool.
 *
 * # Safety
 * Pointers must be valid.
 */
enum FtStatus ft_nbr_optimize(const struct FtScenario *scenario,
                              double elapsed,
                              struct FtDecision *out);

/**
 * Best fee posted now given the pending fees.
 *
 * # Safety
 * `fees` must point to `len` doubles (or be null with `len == 0`).
 */
enum FtStatus ft_ibr_optimize(const struct FtScenario *scenario,
                              const double *fees,
                              size_t len,
                              double elapsed,
                              struct FtDecision *out);

/**
 * Fee and broadcast time of the best-response policy that may wait.
 *
 * # Safety
 * As for [`ft_ibr_optimize`].
 */
enum FtStatus ft_fbr_decide(const struct FtScenario *scenario,
                            const double *fees,
                            size_t len,
                            double elapsed,
                            struct FtDecision *out);

/**
 * Expected utility of waiting until the deadline of a fixed-interval block.
 *
 * # Safety
 * As for [`ft_ibr_optimize`].
 */
enum FtStatus ft_pos_wait_expected_utility(const struct FtScenario *scenario,
                                           const double *fees,
                                           size_t len,
                                           double elapsed,
                                           double *out);

/**
 * Per-round expected utility of the strategic user in the fee-bumping game
 * described by the scenario's `[semi_strategic]` section.
 *
 * # Safety
 * Pointers must be valid.
 */
enum FtStatus ft_ctmc_expected_utility(const struct FtScenario *scenario, double *out);

/**
 * Simulates one oblivious strategy (`"nbr"`, `"ibr"`, `"fbr"`, `"baseline"`
 * or `"fixed:<fee>"`), drawing a fresh pool per trial.
 *
 * # Safety
 * `strategy` must be a valid C string; other pointers must be valid.
 */
enum FtStatus ft_simulate_oblivious(const struct FtScenario *scenario,
                                    const char *strategy,
                                    double elapsed,
                                    uint64_t trials,
                                    uint64_t seed,
                                    struct FtReport *out);

/**
 * Simulates rounds of the fee-bumping game.
 *
 * # Safety
 * Pointers must be valid.
 */
enum FtStatus ft_simulate_semi(const struct FtScenario *scenario,
                               uint64_t trials,
                               uint64_t seed,
                               struct FtReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEE_TIMING_H */
