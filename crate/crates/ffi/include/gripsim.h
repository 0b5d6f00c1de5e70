/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GRIPSIM_H
#define GRIPSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_INPUT = 2,
  GS_STATUS_SOLVER_FAILURE = 3,
  GS_STATUS_BUDGET_EXCEEDED = 4,
  GS_STATUS_IO = 5,
  GS_STATUS_PANIC = 6,
} GsStatus;

typedef enum GsSqueezeEnd {
  GS_SQUEEZE_END_THRESHOLD = 0,
  GS_SQUEEZE_END_JAWS_MET = 1,
  GS_SQUEEZE_END_STEP_BUDGET = 2,
  GS_SQUEEZE_END_ENERGY_RUNAWAY = 3,
  GS_SQUEEZE_END_PLACEMENT_INFEASIBLE = 4,
} GsSqueezeEnd;

/**
 * Scenario configuration handle.
 */
typedef struct GsScenario GsScenario;

/**
 * Jaw pose; width and speeds come from the scenario.
 */
typedef struct GsGrasp {
  double center_x;
  double center_y;
  /**
   * Closing axis angle from +x (rad).
   */
  double axis_angle;
} GsGrasp;

typedef struct GsOutcome {
  bool success;
  enum GsSqueezeEnd squeeze_end;
  /**
   * Pad energies at the end of the squeeze, in threshold units.
   */
  double psi[2];
  /**
   * Final object centroid and rotation; NaN when placement was infeasible.
   */
  double object_x;
  double object_y;
  double object_theta;
  uint64_t steps;
  uint64_t newton_iterations;
  double min_distance;
} GsOutcome;

typedef struct GsRobustness {
  double r;
  uint64_t trials;
  uint64_t successes;
  /**
   * Attempts redrawn after solver failures.
   */
  uint64_t invalid;
} GsRobustness;

/**
 * Two-contact quasistatic holding problem.
 */
typedef struct GsContactInput {
  double points[2][2];
  /**
   * Unit normals pointing into the object.
   */
  double normals[2][2];
  double mu;
  double max_normal_force;
  double torsion_ratio;
  double mass;
  double center_of_mass[2];
  /**
   * Magnitude of gravity along -y.
   */
  double gravity;
} GsContactInput;

typedef struct GsMetrics {
  double ap;
  double ar;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
} GsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Copy the message of the most recent failed call on this thread into `buf`
 * (truncated, always NUL-terminated when `len > 0`). Returns the full message
 * length in bytes, excluding the terminator; 0 when no call has failed.
 *
 * # Safety
 * `buf` must be null or valid for writes of `len` bytes.
 */
size_t gs_last_error_message(char *buf, size_t len);

/**
 * Scenario with every setting at its default.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum GsStatus gs_scenario_default(struct GsScenario **out);

/**
 * Parse a JSON scenario. Missing fields take their defaults; relative polygon
 * paths resolve against the working directory.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or valid for writes.
 */
enum GsStatus gs_scenario_from_json(const char *json, struct GsScenario **out);

/**
 * Release a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void gs_scenario_free(struct GsScenario *scenario);

/**
 * Simulate one unperturbed grasp.
 *
 * # Safety
 * Pointers must be null or valid; `scenario` must be a live handle.
 */
enum GsStatus gs_run_grasp(const struct GsScenario *scenario,
                           const struct GsGrasp *grasp,
                           struct GsOutcome *out);

/**
 * Success fraction over `trials` perturbed copies of the grasp, drawn from `seed`.
 *
 * # Safety
 * Pointers must be null or valid; `scenario` must be a live handle.
 */
enum GsStatus gs_estimate_robustness(const struct GsScenario *scenario,
                                     const struct GsGrasp *grasp,
                                     uint64_t trials,
                                     uint64_t seed,
                                     struct GsRobustness *out);

/**
 * Analytic holding prediction for the grasp on the scenario's object.
 *
 * # Safety
 * Pointers must be null or valid; `scenario` must be a live handle.
 */
enum GsStatus gs_analytic_predict(const struct GsScenario *scenario,
                                  const struct GsGrasp *grasp,
                                  bool *out);

/**
 * Whether two contacts can hold the object against gravity.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum GsStatus gs_wrench_resistance(const struct GsContactInput *input, bool *out);

/**
 * Squeeze stop rule: both pad energies at or above the threshold and within
 * the default balance band of each other.
 */
bool gs_squeeze_termination(double psi1, double psi2, double psi_th);

/**
 * Precision, recall and F1 of `n` predictions against `n` labels, paired by index.
 *
 * # Safety
 * `predictions` and `labels` must be valid for reads of `n` doubles (or null when `n == 0`).
 */
enum GsStatus gs_compute_metrics(const double *predictions,
                                 const double *labels,
                                 size_t n,
                                 double threshold,
                                 struct GsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIPSIM_H */
