#ifndef SKDV_H
#define SKDV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkdvStatus {
  SKDV_STATUS_OK = 0,
  SKDV_STATUS_NULL_POINTER = 1,
  SKDV_STATUS_INVALID_ARGUMENT = 2,
  SKDV_STATUS_PRECONDITION = 3,
  SKDV_STATUS_BLOW_UP = 4,
  SKDV_STATUS_ACCURACY = 5,
  SKDV_STATUS_CONFIG = 6,
  SKDV_STATUS_IO = 7,
  SKDV_STATUS_INTERNAL = 8,
  SKDV_STATUS_PANIC = 9,
} SkdvStatus;

// Validated experiment configuration.
typedef struct SkdvExperiment SkdvExperiment;

// Periodic grid.
typedef struct SkdvGrid SkdvGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a successful call.
// The pointer stays valid until the next `skdv_*` call on the same thread.
const char *skdv_last_error(void);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SkdvStatus skdv_grid_new(double length, uintptr_t points, struct SkdvGrid **out);

// # Safety
// `grid` must be null or a handle from [`skdv_grid_new`] that has not been freed.
void skdv_grid_free(struct SkdvGrid *grid);

// Number of grid points, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
uintptr_t skdv_grid_points(const struct SkdvGrid *grid);

// Applies `S(t)` in place to the complex field stored as separate real and imaginary arrays.
//
// # Safety
// `re` and `im` must each point to `len` writable doubles; `grid` must be a live handle.
enum SkdvStatus skdv_schrodinger_propagate(const struct SkdvGrid *grid,
                                           double t,
                                           double *re,
                                           double *im,
                                           uintptr_t len);

// Applies `U(t)` in place to a real field.
//
// # Safety
// `values` must point to `len` writable doubles; `grid` must be a live handle.
enum SkdvStatus skdv_airy_propagate(const struct SkdvGrid *grid,
                                    double t,
                                    double *values,
                                    uintptr_t len);

// Parses and validates a JSON configuration; unknown keys are rejected.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SkdvStatus skdv_experiment_from_json(const char *json, struct SkdvExperiment **out);

// # Safety
// `exp` must be a live handle.
enum SkdvStatus skdv_experiment_set_seed(struct SkdvExperiment *exp, uint64_t seed);

// Runs the configured scenario, writing its files under `out_dir`. `passed` receives
// whether every verdict passed; a failed verdict is not an error status.
//
// # Safety
// `exp` must be a live handle, `out_dir` a NUL-terminated path and `passed` null or writable.
enum SkdvStatus skdv_experiment_run(const struct SkdvExperiment *exp,
                                    const char *out_dir,
                                    bool *passed);

// # Safety
// `exp` must be null or a handle from [`skdv_experiment_from_json`] that has not been freed.
void skdv_experiment_free(struct SkdvExperiment *exp);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SKDV_H */
