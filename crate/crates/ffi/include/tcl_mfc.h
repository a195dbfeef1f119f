#ifndef TCL_MFC_H
#define TCL_MFC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum TclStatus {
  TCL_STATUS_OK = 0,
  TCL_STATUS_NULL_POINTER = 1,
  TCL_STATUS_INVALID_ARGUMENT = 2,
  TCL_STATUS_CONFIG_ERROR = 3,
  TCL_STATUS_RUNTIME_ERROR = 4,
  TCL_STATUS_PANIC = 5,
} TclStatus;

typedef enum TclDeviation {
  TCL_DEVIATION_ONE_HOUR = 0,
  TCL_DEVIATION_EIGHT_HOUR = 1,
} TclDeviation;

typedef enum TclSolver {
  TCL_SOLVER_MD_MFC = 0,
  TCL_SOLVER_FP_MFG = 1,
  TCL_SOLVER_OMD_MFG = 2,
  TCL_SOLVER_FRANK_WOLFE = 3,
  TCL_SOLVER_NOMINAL = 4,
} TclSolver;

/**
 * Policy sequence `π_n(a|x)`, `n = 1..N`.
 */
typedef struct TclPolicy TclPolicy;

/**
 * Heater tracking problem: kernel, initial distribution and target.
 */
typedef struct TclProblem TclProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty when none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *tcl_last_error(void);

/**
 * Reference heater problem: 200 L tank, deadband [50, 65] °C, 10-minute
 * steps over one day, synthetic drain from `drain_seed`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum TclStatus tcl_problem_reference(uint64_t drain_seed,
                                     enum TclDeviation deviation,
                                     double amplitude,
                                     struct TclProblem **out);

/**
 * Problem described by an experiment config given as JSON text. Relative
 * paths resolve against the working directory.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum TclStatus tcl_problem_from_json(const char *json, struct TclProblem **out);

/**
 * # Safety
 * `problem` must come from a `tcl_problem_*` constructor, or be null.
 */
void tcl_problem_free(struct TclProblem *problem);

/**
 * Number of states, actions and steps.
 *
 * # Safety
 * `problem` must be a live handle; the outputs valid pointers.
 */
enum TclStatus tcl_problem_dims(const struct TclProblem *problem,
                                size_t *n_states,
                                size_t *n_actions,
                                size_t *horizon);

/**
 * Objective of the nominal policy.
 *
 * # Safety
 * `problem` must be a live handle; `out` a valid pointer.
 */
enum TclStatus tcl_problem_nominal_objective(const struct TclProblem *problem, double *out);

/**
 * Copies the target `γ_1..γ_N` into `out`, which holds `len` values.
 *
 * # Safety
 * `problem` must be a live handle; `out` must point to `len` doubles.
 */
enum TclStatus tcl_problem_target(const struct TclProblem *problem, double *out, size_t len);

/**
 * Runs `solver` for `iterations` steps with `τ_k = step_constant / √K`.
 * `init_delta = 0` starts from the uniform policy, otherwise from the
 * nominal rule deviated by `init_delta`. Writes the returned policy and its
 * objective.
 *
 * # Safety
 * `problem` must be a live handle; the outputs valid pointers.
 */
enum TclStatus tcl_solve(const struct TclProblem *problem,
                         enum TclSolver solver,
                         size_t iterations,
                         double step_constant,
                         double init_delta,
                         struct TclPolicy **out_policy,
                         double *out_objective);

/**
 * # Safety
 * `policy` must come from [`tcl_solve`], or be null.
 */
void tcl_policy_free(struct TclPolicy *policy);

/**
 * `π_n(a|x)` for `n` in `1..=N`.
 *
 * # Safety
 * `policy` must be a live handle; `out` a valid pointer.
 */
enum TclStatus tcl_policy_prob(const struct TclPolicy *policy,
                               size_t n,
                               size_t x,
                               size_t a,
                               double *out);

/**
 * Simulates `fleet_size` heaters under `policy`. Writes the fraction of
 * heaters ON at `n = 0..=N` into `mean` (length `horizon + 1`) and the mean
 * daily switch count into `switches`.
 *
 * # Safety
 * Handles must be live; `mean` must point to `len` doubles.
 */
enum TclStatus tcl_simulate(const struct TclProblem *problem,
                            const struct TclPolicy *policy,
                            size_t fleet_size,
                            uint64_t seed,
                            double *mean,
                            size_t len,
                            double *switches);

/**
 * Runs a config file end to end, as `tcl-mfc run` does.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string.
 */
enum TclStatus tcl_run_experiment(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TCL_MFC_H */
