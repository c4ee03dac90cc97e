#ifndef SIMLAB_H
#define SIMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every exported function.
 */
typedef enum SimlabStatus {
  SIMLAB_STATUS_OK = 0,
  SIMLAB_STATUS_NULL_POINTER = 1,
  SIMLAB_STATUS_INVALID_ARGUMENT = 2,
  SIMLAB_STATUS_BLOW_UP = 3,
  SIMLAB_STATUS_CONFIG = 4,
  SIMLAB_STATUS_IO = 5,
  /**
   * The operation ran but at least one asserted check failed.
   */
  SIMLAB_STATUS_CHECKS_FAILED = 6,
  SIMLAB_STATUS_INTERNAL = 7,
} SimlabStatus;

/**
 * Subcommands of [`simlab_run_command`].
 */
typedef enum SimlabCommand {
  SIMLAB_COMMAND_SIMULATE = 0,
  SIMLAB_COMMAND_SWEEP = 1,
  SIMLAB_COMMAND_EULER_CHECK = 2,
  SIMLAB_COMMAND_VERIFY = 3,
} SimlabCommand;

/**
 * Opaque simulator: the state `X_t` and its stepper.
 */
typedef struct SimlabSimulator SimlabSimulator;

/**
 * Parameters of a simulator; noise is the default family for `alpha`.
 */
typedef struct SimlabParams {
  uint32_t n;
  double length;
  double nu;
  double alpha;
  double dt;
  uint64_t seed;
  uint64_t stream;
} SimlabParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t simlab_last_error_message(char *buf, size_t len);

/**
 * Creates a simulator at rest (`X_0 = 0`).
 *
 * # Safety
 * `params` must be valid for reads and `out` valid for writes.
 */
enum SimlabStatus simlab_simulator_new(const struct SimlabParams *params,
                                       struct SimlabSimulator **out);

/**
 * Releases a simulator; null is ignored.
 *
 * # Safety
 * `sim` must come from [`simlab_simulator_new`] and not be used afterwards.
 */
void simlab_simulator_free(struct SimlabSimulator *sim);

/**
 * Advances the state by `steps` time steps.
 *
 * # Safety
 * `sim` must be a live simulator handle.
 */
enum SimlabStatus simlab_simulator_step(struct SimlabSimulator *sim, uint64_t steps);

/**
 * Current time of the simulator.
 *
 * # Safety
 * `sim` must be a live simulator handle and `out` valid for writes.
 */
enum SimlabStatus simlab_simulator_time(const struct SimlabSimulator *sim, double *out);

/**
 * `||X_t||_{H^s}` of the current state.
 *
 * # Safety
 * `sim` must be a live simulator handle and `out` valid for writes.
 */
enum SimlabStatus simlab_simulator_norm(const struct SimlabSimulator *sim, double s, double *out);

/**
 * Writes the current state as an SPF1 snapshot (plus its JSON sidecar).
 *
 * # Safety
 * `sim` must be a live simulator handle and `path` a NUL-terminated string.
 */
enum SimlabStatus simlab_simulator_write_snapshot(const struct SimlabSimulator *sim,
                                                  const char *path);

/**
 * Runs the identity suite on an `n x n` lattice; `max_residual` receives
 * the worst residual relative to its tolerance (pass iff `<= 1`).
 *
 * # Safety
 * `max_residual` must be null or valid for writes.
 */
enum SimlabStatus simlab_verify(uint32_t n, uint64_t seed, double *max_residual);

/**
 * Runs a CLI command on configuration text, writing artifacts to `out_dir`.
 *
 * # Safety
 * `config_toml` and `out_dir` must be NUL-terminated strings.
 */
enum SimlabStatus simlab_run_command(enum SimlabCommand command,
                                     const char *config_toml,
                                     const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMLAB_H */
