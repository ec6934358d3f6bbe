#ifndef MFG_LG_H
#define MFG_LG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum MfgStatus {
  MFG_STATUS_OK = 0,
  MFG_STATUS_NULL_POINTER = 1,
  MFG_STATUS_INVALID_UTF8 = 2,
  // The config text is malformed or a value is out of range.
  MFG_STATUS_CONFIG = 3,
  // The config parsed but the problem cannot be discretized.
  MFG_STATUS_SETUP = 4,
  // The solver failed during the iteration.
  MFG_STATUS_SOLVE = 5,
  // Level index past the last time level.
  MFG_STATUS_OUT_OF_RANGE = 6,
  // The destination buffer is too short.
  MFG_STATUS_BUFFER_TOO_SMALL = 7,
  MFG_STATUS_PANIC = 8,
} MfgStatus;

// Parsed run configuration.
typedef struct MfgConfig MfgConfig;

// Result of a solve: density and value on every time level.
typedef struct MfgSolution MfgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library from the same thread.
const char *mfg_last_error(void);

// Parses NUL-terminated config text into `*out`.
//
// # Safety
// `text` must be NULL or a valid C string; `out` must be NULL or writable.
enum MfgStatus mfg_config_parse(const char *text, struct MfgConfig **out);

// # Safety
// `cfg` must be NULL or a handle from [`mfg_config_parse`] not yet freed.
void mfg_config_free(struct MfgConfig *cfg);

// Validates `cfg` without solving: grid, time step and mollifier.
//
// # Safety
// `cfg` must be NULL or a live config handle.
enum MfgStatus mfg_config_check(const struct MfgConfig *cfg);

// Runs the fixed-point iteration for `cfg` (which must set `dx`). Running
// out of iterations is not an error; see [`mfg_solution_converged`].
//
// # Safety
// `cfg` must be NULL or a live config handle; `out` NULL or writable.
enum MfgStatus mfg_solve(const struct MfgConfig *cfg, struct MfgSolution **out);

// # Safety
// `sol` must be NULL or a handle from [`mfg_solve`] not yet freed.
void mfg_solution_free(struct MfgSolution *sol);

// Space dimension; 0 for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
size_t mfg_solution_dim(const struct MfgSolution *sol);

// Number of grid nodes (cells); 0 for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
size_t mfg_solution_cells(const struct MfgSolution *sol);

// Number of time levels, `N + 1`; 0 for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
size_t mfg_solution_levels(const struct MfgSolution *sol);

// Effective time step; NaN for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
double mfg_solution_dt(const struct MfgSolution *sol);

// Final fixed-point residual; NaN for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
double mfg_solution_residual(const struct MfgSolution *sol);

// Picard iterations performed; 0 for NULL.
//
// # Safety
// `sol` must be NULL or a live solution handle.
size_t mfg_solution_iterations(const struct MfgSolution *sol);

// 1 if the residual fell below the tolerance, 0 otherwise (or for NULL).
//
// # Safety
// `sol` must be NULL or a live solution handle.
int mfg_solution_converged(const struct MfgSolution *sol);

// Node coordinates, `cells * dim` values, node-major.
//
// # Safety
// `sol` must be NULL or a live solution handle; `buf` must be NULL or
// valid for `len` writes.
enum MfgStatus mfg_solution_nodes(const struct MfgSolution *sol, double *buf, size_t len);

// Density cell coefficients at time level `level`, `cells` values.
//
// # Safety
// As for [`mfg_solution_nodes`].
enum MfgStatus mfg_solution_density(const struct MfgSolution *sol,
                                    size_t level,
                                    double *buf,
                                    size_t len);

// Unmollified value at the nodes at time level `level`, `cells` values.
//
// # Safety
// As for [`mfg_solution_nodes`].
enum MfgStatus mfg_solution_value(const struct MfgSolution *sol,
                                  size_t level,
                                  double *buf,
                                  size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFG_LG_H */
