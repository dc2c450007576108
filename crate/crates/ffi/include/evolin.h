#ifndef EVOLIN_H
#define EVOLIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * What a scenario document describes.
 */
typedef enum EvolinKind {
  /**
   * A scalar evolution problem.
   */
  EVOLIN_KIND_GENERIC = 0,
  /**
   * A two-dimensional eddy-current field problem.
   */
  EVOLIN_KIND_MAXWELL = 1,
} EvolinKind;

/**
 * Which solver runs. The two routes are independent implementations
 * and agree within tolerance on well-posed scenarios; running both is
 * the cheapest cross-check.
 */
typedef enum EvolinRoute {
  /**
   * Regularization schedule with a vanishing smoothing parameter
   * (resolvent splitting for field scenarios).
   */
  EVOLIN_ROUTE_SCHEDULE = 0,
  /**
   * Causal per-step solver (semismooth Newton for field scenarios).
   */
  EVOLIN_ROUTE_STEPPER = 1,
} EvolinRoute;

/**
 * Outcome of a call, mirroring the CLI exit classes.
 */
typedef enum EvolinStatus {
  /**
   * The call succeeded.
   */
  EVOLIN_STATUS_OK = 0,
  /**
   * Misuse of the interface or an internal failure.
   */
  EVOLIN_STATUS_ERROR = 1,
  /**
   * The scenario document does not match the schema.
   */
  EVOLIN_STATUS_SCHEMA = 2,
  /**
   * The scenario violates a structural hypothesis the solvers need.
   */
  EVOLIN_STATUS_HYPOTHESIS = 3,
  /**
   * An iteration failed to reach its tolerance.
   */
  EVOLIN_STATUS_CONVERGENCE = 4,
} EvolinStatus;

/**
 * A parsed scenario. Opaque; create with [`evolin_scenario_load`],
 * release with [`evolin_scenario_free`].
 */
typedef struct EvolinScenario EvolinScenario;

/**
 * A solved trajectory plus its diagnostics. Opaque; create with
 * [`evolin_solve`], release with [`evolin_solution_free`].
 *
 * The trajectory is row-major: `dim` values per time sample. Generic
 * scenarios store the state vector; field scenarios store the edge
 * field, then the cell field, then the flux.
 */
typedef struct EvolinSolution EvolinSolution;

/**
 * Library version as a static string.
 */
const char *evolin_version(void);

/**
 * Message of the most recent failure on this thread, or an empty
 * string. The pointer stays valid until the next failing call on the
 * same thread.
 */
const char *evolin_last_error_message(void);

/**
 * Parses a scenario document and stores a handle in `out`.
 *
 * # Safety
 * `json` must point to a NUL-terminated string, `out` to writable
 * storage for one pointer. On failure `out` is set to null.
 */
enum EvolinStatus evolin_scenario_load(const char *json, struct EvolinScenario **out);

/**
 * Scenario kind. Null yields `Generic` with the error message set;
 * check [`evolin_last_error_message`] when passing untrusted handles.
 *
 * # Safety
 * `scenario` must be null or a live handle from
 * [`evolin_scenario_load`].
 */
enum EvolinKind evolin_scenario_kind(const struct EvolinScenario *scenario);

/**
 * Scenario name (the `name` field, or the kind when absent). Borrows
 * from the handle; null in, null out.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
const char *evolin_scenario_name(const struct EvolinScenario *scenario);

/**
 * Releases a scenario handle. Null is a no-op.
 *
 * # Safety
 * `scenario` must be null or a live handle; the handle is dead
 * afterwards.
 */
void evolin_scenario_free(struct EvolinScenario *scenario);

/**
 * Solves the scenario on one route and stores a solution handle in
 * `out`. `tol` is the relative tolerance, `seed` drives every sampled
 * estimate; equal inputs give bit-identical solutions.
 *
 * # Safety
 * `scenario` must be a live handle, `out` writable storage for one
 * pointer. On failure `out` is set to null.
 */
enum EvolinStatus evolin_solve(const struct EvolinScenario *scenario,
                               enum EvolinRoute route,
                               double tol,
                               uint64_t seed,
                               struct EvolinSolution **out);

/**
 * Number of time samples; 0 for null.
 *
 * # Safety
 * `solution` must be null or a live handle from [`evolin_solve`].
 */
uintptr_t evolin_solution_len(const struct EvolinSolution *solution);

/**
 * Values per time sample; 0 for null.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
uintptr_t evolin_solution_dim(const struct EvolinSolution *solution);

/**
 * Pointer to the `len` sample times. Borrows from the handle; null
 * in, null out.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const double *evolin_solution_times(const struct EvolinSolution *solution);

/**
 * Pointer to the `len * dim` trajectory values, row-major by time
 * sample. Borrows from the handle; null in, null out.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const double *evolin_solution_data(const struct EvolinSolution *solution);

/**
 * Solver diagnostics as a JSON object. Borrows from the handle; null
 * in, null out.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const char *evolin_solution_report_json(const struct EvolinSolution *solution);

/**
 * Releases a solution handle. Null is a no-op.
 *
 * # Safety
 * `solution` must be null or a live handle; the handle is dead
 * afterwards.
 */
void evolin_solution_free(struct EvolinSolution *solution);

#endif  /* EVOLIN_H */
