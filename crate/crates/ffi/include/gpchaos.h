#ifndef GPCHAOS_H
#define GPCHAOS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define GPC_OK 0

/**
 * ABI misuse: null pointer, unknown enum value, or buffer length mismatch.
 */
#define GPC_MISUSE 1

/**
 * Input rejected by validation.
 */
#define GPC_INVALID 2

/**
 * A numerical invariant failed mid-run.
 */
#define GPC_NUMERICAL 3

/**
 * Internal panic caught at the boundary.
 */
#define GPC_PANIC 4

/**
 * Solved ground state of the one-body energy functional.
 */
typedef struct GpcGp GpcGp;

/**
 * Solved few-body ground state with its problem definition.
 */
typedef struct GpcNbody GpcNbody;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread; empty string if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *gpc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gpc_version(void);

/**
 * Zero-energy scattering of a square well: scattering length, the kinetic
 * fraction s-hat, and the linear-tail fit residual.
 *
 * # Safety
 * Output pointers must be valid for one f64 write or null is rejected.
 */
int32_t gpc_scatter_square_well(double depth,
                                double radius,
                                double r_max,
                                uintptr_t n_r,
                                double *out_a,
                                double *out_s_hat,
                                double *out_tail_residual);

/**
 * Minimizes the one-body functional with quartic coupling g on a uniform
 * grid. On GPC_OK, *out owns the solution and must go to gpc_gp_free.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
int32_t gpc_gp_solve(uintptr_t dim,
                     uintptr_t points_per_axis,
                     double half_width,
                     int32_t trap_kind,
                     double trap_strength,
                     double g,
                     double tol,
                     uintptr_t max_iters,
                     struct GpcGp **out);

/**
 * # Safety
 * `handle` must come from gpc_gp_solve and not have been freed.
 */
int32_t gpc_gp_lambda(const struct GpcGp *handle, double *out);

/**
 * # Safety
 * As for gpc_gp_lambda; all four output pointers must be writable.
 */
int32_t gpc_gp_energy(const struct GpcGp *handle,
                      double *out_kinetic,
                      double *out_trap,
                      double *out_interaction,
                      double *out_total);

/**
 * # Safety
 * As for gpc_gp_lambda.
 */
int32_t gpc_gp_residual(const struct GpcGp *handle, double *out);

/**
 * # Safety
 * As for gpc_gp_lambda.
 */
int32_t gpc_gp_iterations(const struct GpcGp *handle, uintptr_t *out);

/**
 * Grid geometry of the solution, for sizing the density buffer:
 * the density holds points_per_axis^dim values.
 *
 * # Safety
 * As for gpc_gp_lambda; all three output pointers must be writable.
 */
int32_t gpc_gp_grid(const struct GpcGp *handle,
                    uintptr_t *out_dim,
                    uintptr_t *out_points_per_axis,
                    double *out_half_width);

/**
 * Copies the ground-state density, row-major, into `buf` (len must equal
 * the grid size from gpc_gp_grid).
 *
 * # Safety
 * `buf` must be valid for `len` f64 writes.
 */
int32_t gpc_gp_density(const struct GpcGp *handle, double *buf, uintptr_t len);

/**
 * # Safety
 * `handle` must come from gpc_gp_solve; passing it again afterwards is
 * undefined. Null is a no-op.
 */
void gpc_gp_free(struct GpcGp *handle);

/**
 * Exact ground state of n_particles in `dim` dimensions with a scaled pair
 * interaction. scaling 0 divides the pair strength by N; scaling 1 length-
 * rescales it so its scattering length is g/(4 pi N) (g must be > 0 there).
 * On GPC_OK, *out owns the result and must go to gpc_nbody_free.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
int32_t gpc_nbody_solve(uintptr_t n_particles,
                        uintptr_t dim,
                        uintptr_t points_per_axis,
                        double half_width,
                        int32_t trap_kind,
                        double trap_strength,
                        int32_t pair_kind,
                        double pair_a,
                        double pair_b,
                        double pair_c,
                        int32_t scaling,
                        double g,
                        double tol,
                        uintptr_t max_iters,
                        struct GpcNbody **out);

/**
 * # Safety
 * `handle` must come from gpc_nbody_solve and not have been freed.
 */
int32_t gpc_nbody_energy(const struct GpcNbody *handle, double *out);

/**
 * Per-particle energy split (kinetic, trap, half the pair interaction);
 * the three sum to the energy over N.
 *
 * # Safety
 * As for gpc_nbody_energy; all four output pointers must be writable.
 */
int32_t gpc_nbody_components(const struct GpcNbody *handle,
                             double *out_kinetic,
                             double *out_trap,
                             double *out_interaction,
                             double *out_total);

/**
 * # Safety
 * As for gpc_nbody_energy.
 */
int32_t gpc_nbody_residual(const struct GpcNbody *handle, double *out);

/**
 * Copies the joint density of the first `particles` particles, row-major,
 * into `buf`; len must equal points_per_axis^(particles * dim).
 *
 * # Safety
 * `buf` must be valid for `len` f64 writes.
 */
int32_t gpc_nbody_marginal(const struct GpcNbody *handle,
                           uintptr_t particles,
                           double *buf,
                           uintptr_t len);

/**
 * # Safety
 * `handle` must come from gpc_nbody_solve; passing it again afterwards is
 * undefined. Null is a no-op.
 */
void gpc_nbody_free(struct GpcNbody *handle);

/**
 * Entropy of a density given on a uniform grid, with the k-moment finiteness
 * check. The buffer may be unnormalized.
 *
 * # Safety
 * `values` must hold `len` f64s; `out` must be writable.
 */
int32_t gpc_entropy(uintptr_t dim,
                    uintptr_t points_per_axis,
                    double half_width,
                    const double *values,
                    uintptr_t len,
                    double moment_k,
                    double *out);

/**
 * Fisher information of a density given on a uniform grid.
 *
 * # Safety
 * As for gpc_entropy.
 */
int32_t gpc_fisher_information(uintptr_t dim,
                               uintptr_t points_per_axis,
                               double half_width,
                               const double *values,
                               uintptr_t len,
                               double *out);

/**
 * Relative entropy of p against q on a shared grid, divided by n_particles.
 *
 * # Safety
 * `p` and `q` must each hold `len` f64s; `out` must be writable.
 */
int32_t gpc_relative_entropy(uintptr_t dim,
                             uintptr_t points_per_axis,
                             double half_width,
                             const double *p,
                             const double *q,
                             uintptr_t len,
                             uintptr_t n_particles,
                             double *out);

/**
 * Relative Fisher information of p against q on a shared grid, divided by
 * n_particles.
 *
 * # Safety
 * As for gpc_relative_entropy.
 */
int32_t gpc_relative_fisher(uintptr_t dim,
                            uintptr_t points_per_axis,
                            double half_width,
                            const double *p,
                            const double *q,
                            uintptr_t len,
                            uintptr_t n_particles,
                            double *out);

/**
 * Total variation distance between two densities on a shared grid.
 *
 * # Safety
 * As for gpc_relative_entropy.
 */
int32_t gpc_total_variation(uintptr_t dim,
                            uintptr_t points_per_axis,
                            double half_width,
                            const double *p,
                            const double *q,
                            uintptr_t len,
                            double *out);

/**
 * Empirical Wasserstein distance between two sample sets of equal size by
 * exact assignment. Points are row-major (count x dim). order is 1 or 2;
 * truncation > 0 truncates the order-1 ground distance (per particle block
 * of size dim / n_particles), truncation <= 0 means untruncated Euclidean.
 *
 * # Safety
 * `xs` and `ys` must hold count * dim f64s each; `out` must be writable.
 */
int32_t gpc_wasserstein(uintptr_t dim,
                        const double *xs,
                        const double *ys,
                        uintptr_t count,
                        int32_t order,
                        double truncation,
                        uintptr_t n_particles,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPCHAOS_H */
