#ifndef DIRAC_VACUUM_H
#define DIRAC_VACUUM_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DvStatus {
  DV_STATUS_OK = 0,
  DV_STATUS_NULL_POINTER = 1,
  DV_STATUS_INVALID_ARGUMENT = 2,
  DV_STATUS_INVALID_GRID = 3,
  DV_STATUS_MISMATCH = 4,
  DV_STATUS_NOT_CONVERGED = 5,
  DV_STATUS_LANDAU_POLE = 6,
  DV_STATUS_NUMERICAL = 7,
  DV_STATUS_IO = 8,
  DV_STATUS_REFUSED = 9,
  DV_STATUS_PANIC = 10,
} DvStatus;

typedef struct DvDensity DvDensity;

typedef struct DvGrid DvGrid;

typedef struct DvSolution DvSolution;

/**
 * Energy terms of a solution, in units of the electron mass.
 */
typedef struct DvEnergy {
  double kinetic;
  double external;
  double direct;
  double total;
  double lower_bound;
} DvEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *dv_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dv_version(void);

/**
 * Momentum grid of box side `box_side`, `points_per_axis` points and cutoff `cutoff`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum DvStatus dv_grid_new(double box_side,
                          size_t points_per_axis,
                          double cutoff,
                          struct DvGrid **out);

/**
 * # Safety
 * `grid` must come from [`dv_grid_new`] and not have been freed; null is ignored.
 */
void dv_grid_free(struct DvGrid *grid);

/**
 * One-particle dimension `4M`, or 0 for a null grid.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
size_t dv_grid_dimension(const struct DvGrid *grid);

/**
 * Normalized Gaussian of charge `charge` and standard deviation `width`
 * centred at the origin. Widths below the grid spacing are refused unless
 * `force` is set.
 *
 * # Safety
 * `grid` must be a live grid handle and `out` valid for one pointer write.
 */
enum DvStatus dv_density_gaussian(const struct DvGrid *grid,
                                  double charge,
                                  double width,
                                  bool force,
                                  struct DvDensity **out);

/**
 * # Safety
 * `density` must be null or a live density handle; it is invalid afterwards.
 */
void dv_density_free(struct DvDensity *density);

/**
 * `L³ ρ̂(0)`.
 *
 * # Safety
 * `density` must be a live density handle and `out` writable.
 */
enum DvStatus dv_density_total_charge(const struct DvDensity *density, double *out);

/**
 * Number of Fourier coefficients.
 *
 * # Safety
 * `density` must be null or a live density handle.
 */
size_t dv_density_len(const struct DvDensity *density);

/**
 * Copies the coefficients into `re` and `im`, each of length `len` equal to
 * [`dv_density_len`].
 *
 * # Safety
 * `re` and `im` must be writable for `len` doubles.
 */
enum DvStatus dv_density_coefficients(const struct DvDensity *density,
                                      double *re,
                                      double *im,
                                      size_t len);

/**
 * Self-consistent solution at fixed `mu` from the free vacuum.
 * `tolerance <= 0` and `max_iterations == 0` select the defaults.
 *
 * # Safety
 * `grid` and `external` must be live handles (the density built on `grid`),
 * `out` valid for one pointer write.
 */
enum DvStatus dv_solve(const struct DvGrid *grid,
                       const struct DvDensity *external,
                       double alpha,
                       double mu,
                       double tolerance,
                       size_t max_iterations,
                       struct DvSolution **out);

/**
 * # Safety
 * `solution` must be null or a live solution handle.
 */
void dv_solution_free(struct DvSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle and `out` writable.
 */
enum DvStatus dv_solution_energy(const struct DvSolution *solution, struct DvEnergy *out);

/**
 * Generalized charge `Tr_{P⁰₋} Q` and iteration count.
 *
 * # Safety
 * `solution` must be a live handle; `charge` and `iterations` writable.
 */
enum DvStatus dv_solution_summary(const struct DvSolution *solution,
                                  double *charge,
                                  size_t *iterations);

/**
 * New density handle holding the induced vacuum density `ρ_Q`.
 *
 * # Safety
 * `solution` must be a live handle and `out` valid for one pointer write.
 */
enum DvStatus dv_solution_density(const struct DvSolution *solution, struct DvDensity **out);

/**
 * Solution as a JSON document; release it with [`dv_string_free`].
 *
 * # Safety
 * `solution` must be a live handle and `out` valid for one pointer write.
 */
enum DvStatus dv_solution_to_json(const struct DvSolution *solution, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dv_string_free(char *s);

/**
 * `B_Λ`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DvStatus dv_b_lambda(double cutoff, double *out);

/**
 * `α_ph = α / (1 + α B_Λ)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DvStatus dv_alpha_physical(double alpha, double cutoff, double *out);

/**
 * `α = α_ph / (1 − α_ph B_Λ)`; `DV_STATUS_LANDAU_POLE` when `α_ph B_Λ ≥ 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DvStatus dv_alpha_bare(double alpha_ph, double cutoff, double *out);

/**
 * Cutoff with `α_ph B_Λ = κ`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DvStatus dv_lambda_from_kappa(double alpha_ph, double kappa, double *out);

/**
 * Uehling potential at radius `x` of a centred Gaussian charge.
 *
 * # Safety
 * `out` must be writable.
 */
enum DvStatus dv_uehling_potential(double charge, double width, double x, double *out);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t dv_last_error_copy(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRAC_VACUUM_H */
