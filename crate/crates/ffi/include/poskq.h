#ifndef POSKQ_H
#define POSKQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every call.
 */
typedef enum PoskqStatus {
  POSKQ_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  POSKQ_STATUS_NULL_POINTER = 1,
  /*
   Arguments were rejected (sizes, ranges, non-finite values).
   */
  POSKQ_STATUS_INVALID_INPUT = 2,
  /*
   The solver stopped before certifying its tolerance; outputs hold
   the best iterate found.
   */
  POSKQ_STATUS_NOT_CONVERGED = 3,
  /*
   The operation is not defined for this kernel or target.
   */
  POSKQ_STATUS_UNSUPPORTED = 4,
  /*
   A numerical precondition failed (e.g. an indefinite matrix).
   */
  POSKQ_STATUS_NUMERICAL = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  POSKQ_STATUS_PANIC = 6,
} PoskqStatus;

/*
 Opaque kernel handle.
 */
typedef struct PoskqKernel PoskqKernel;

/*
 Opaque pool problem: Gram matrix, kernel means and embedding norm of a
 fixed candidate pool.
 */
typedef struct PoskqProblem PoskqProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL if none. The
 string stays valid until the next failing call on the same thread.
 */
const char *poskq_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *poskq_version(void);

/*
 Periodic Sobolev kernel of smoothness `s >= 1` on `[0,1)^dim`.

 # Safety
 `out` must be NULL or point to writable storage for one handle.
 */
enum PoskqStatus poskq_kernel_sobolev_new(size_t dim,
                                          uint32_t smoothness,
                                          struct PoskqKernel **out);

/*
 Gaussian (RBF) kernel with the given lengthscale on `R^dim`.

 # Safety
 `out` must be NULL or point to writable storage for one handle.
 */
enum PoskqStatus poskq_kernel_rbf_new(size_t dim, double lengthscale, struct PoskqKernel **out);

/*
 Releases a kernel; NULL is ignored.

 # Safety
 `kernel` must be NULL or a handle from a kernel constructor, freed once.
 */
void poskq_kernel_free(struct PoskqKernel *kernel);

/*
 Point dimension of a kernel (0 for NULL).

 # Safety
 `kernel` must be NULL or a live kernel handle.
 */
size_t poskq_kernel_dim(const struct PoskqKernel *kernel);

/*
 `k(x, y)` for two points of the kernel's dimension.

 # Safety
 `x` and `y` must each hold `dim` doubles; `out` one writable double.
 */
enum PoskqStatus poskq_kernel_eval(const struct PoskqKernel *kernel,
                                   const double *x,
                                   const double *y,
                                   double *out);

/*
 `sup_x k(x, x)` bound used by the theory (`1` for RBF).

 # Safety
 `out` must point to one writable double.
 */
enum PoskqStatus poskq_kernel_diagonal_bound(const struct PoskqKernel *kernel, double *out);

/*
 Pool problem for the uniform measure on the torus (Sobolev kernels
 only). `points` holds `n * dim` coordinates in `[0,1)`.

 # Safety
 `points` must hold `n * dim` doubles; `out` one writable handle slot.
 */
enum PoskqStatus poskq_problem_uniform_torus(const struct PoskqKernel *kernel,
                                             const double *points,
                                             size_t n,
                                             struct PoskqProblem **out);

/*
 Pool problem for the uniform empirical measure on `m` support points.

 # Safety
 `pool` must hold `n * dim` doubles, `support` `m * dim` doubles; `out`
 one writable handle slot.
 */
enum PoskqStatus poskq_problem_empirical(const struct PoskqKernel *kernel,
                                         const double *pool,
                                         size_t n,
                                         const double *support,
                                         size_t m,
                                         struct PoskqProblem **out);

/*
 Releases a problem; NULL is ignored.

 # Safety
 `problem` must be NULL or a handle from a problem constructor, freed once.
 */
void poskq_problem_free(struct PoskqProblem *problem);

/*
 Pool size of a problem (0 for NULL).

 # Safety
 `problem` must be NULL or a live problem handle.
 */
size_t poskq_problem_len(const struct PoskqProblem *problem);

/*
 Frank-Wolfe weights after `iterations >= 0` steps, fixed step `2/(t+2)`
 or exact line search. Writes `len` weights.

 # Safety
 `weights` must hold `poskq_problem_len(problem)` writable doubles.
 */
enum PoskqStatus poskq_fw_weights(const struct PoskqProblem *problem,
                                  int64_t iterations,
                                  bool line_search,
                                  double *weights);

/*
 Pool-optimal simplex weights. `gap` (may be NULL) receives the duality
 gap certificate. On `POSKQ_STATUS_NOT_CONVERGED` the outputs hold the
 best iterate.

 # Safety
 `weights` must hold `poskq_problem_len(problem)` writable doubles; `gap`
 must be NULL or point to one writable double.
 */
enum PoskqStatus poskq_cqp_weights(const struct PoskqProblem *problem,
                                   double *weights,
                                   double *gap);

/*
 Worst-case error of arbitrary `weights` (length `len`) on the pool.

 # Safety
 `weights` must hold `poskq_problem_len(problem)` doubles; `out` one
 writable double.
 */
enum PoskqStatus poskq_wce(const struct PoskqProblem *problem, const double *weights, double *out);

/*
 Euclidean distance from `target` (`dim` doubles) to the convex hull of
 `n` points. `weights` (may be NULL) receives the `n` convex weights.

 # Safety
 `points` must hold `n * dim` doubles, `target` `dim`; `distance` one
 writable double; `weights` NULL or `n` writable doubles.
 */
enum PoskqStatus poskq_hull_distance(const double *points,
                                     size_t n,
                                     size_t dim,
                                     const double *target,
                                     double *distance,
                                     double *weights);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSKQ_H */
