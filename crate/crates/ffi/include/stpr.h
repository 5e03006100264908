#ifndef STPR_H
#define STPR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StprStatus {
  STPR_STATUS_OK = 0,
  STPR_STATUS_NULL_ARGUMENT = 1,
  STPR_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed or invalid scenario or constraint document.
   */
  STPR_STATUS_PARSE = 3,
  /**
   * The constraint cannot be evaluated in-process (bridge-backed).
   */
  STPR_STATUS_UNSUPPORTED = 4,
  /**
   * Sampling or planning failed before producing an outcome.
   */
  STPR_STATUS_PLANNING = 5,
  STPR_STATUS_BUFFER_TOO_SMALL = 6,
  STPR_STATUS_INVALID_ARGUMENT = 7,
  STPR_STATUS_INTERNAL = 8,
} StprStatus;

typedef enum StprMethod {
  STPR_METHOD_ASTAR = 0,
  STPR_METHOD_RRTSTAR = 1,
} StprMethod;

/**
 * A standalone constraint expression.
 */
typedef struct StprConstraint StprConstraint;

/**
 * A planning outcome together with its validation verdict.
 */
typedef struct StprPlan StprPlan;

/**
 * A loaded scenario.
 */
typedef struct StprScenario StprScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next `stpr_*` call on the same thread.
 */
const char *stpr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *stpr_version(void);

/**
 * Load a scenario file (its scene and fixture files are resolved relative
 * to it).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StprStatus stpr_scenario_load(const char *path, struct StprScenario **out);

/**
 * # Safety
 * `scenario` must come from [`stpr_scenario_load`] and not be used again.
 */
void stpr_scenario_free(struct StprScenario *scenario);

/**
 * Parse a constraint expression from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum StprStatus stpr_constraint_from_json(const char *json, struct StprConstraint **out);

/**
 * Whether `(x, y, z)` is forbidden: writes 1 or 0 to `out`.
 *
 * # Safety
 * `constraint` must be live; `out` must be writable.
 */
enum StprStatus stpr_constraint_evaluate(const struct StprConstraint *constraint,
                                         double x,
                                         double y,
                                         double z,
                                         uint8_t *out);

/**
 * # Safety
 * `constraint` must come from [`stpr_constraint_from_json`] and not be used
 * again.
 */
void stpr_constraint_free(struct StprConstraint *constraint);

/**
 * Sample clouds for every object and constraint, plan, and validate the
 * result. `sample_count == 0` keeps the scenario's own count; `vanilla != 0`
 * plans against object clouds only (validation still uses every
 * constraint).
 *
 * # Safety
 * `scenario` must be live; `out` must be writable.
 */
enum StprStatus stpr_plan(const struct StprScenario *scenario,
                          enum StprMethod method,
                          uint8_t vanilla,
                          size_t sample_count,
                          uint64_t seed,
                          struct StprPlan **out);

/**
 * 1 when a path was found, 0 when the planner certified that none exists.
 *
 * # Safety
 * `plan` must be live or null (null reads as 0).
 */
uint8_t stpr_plan_found(const struct StprPlan *plan);

/**
 * 1 when the path passed validation (or no path was returned).
 *
 * # Safety
 * `plan` must be live or null (null reads as 0).
 */
uint8_t stpr_plan_valid(const struct StprPlan *plan);

/**
 * Path length; infinity when no path was found or `plan` is null.
 *
 * # Safety
 * `plan` must be live or null.
 */
double stpr_plan_cost(const struct StprPlan *plan);

/**
 * Number of waypoints (0 when no path was found).
 *
 * # Safety
 * `plan` must be live or null.
 */
size_t stpr_plan_waypoint_count(const struct StprPlan *plan);

/**
 * Copy waypoints into `xyz` as consecutive `x, y, z` triples. `capacity`
 * counts points, not doubles.
 *
 * # Safety
 * `plan` must be live; `xyz` must hold `3 * capacity` doubles.
 */
enum StprStatus stpr_plan_copy_waypoints(const struct StprPlan *plan, double *xyz, size_t capacity);

/**
 * # Safety
 * `plan` must come from [`stpr_plan`] and not be used again.
 */
void stpr_plan_free(struct StprPlan *plan);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STPR_H */
