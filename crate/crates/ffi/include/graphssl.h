#ifndef GRAPHSSL_H
#define GRAPHSSL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Version of this ABI. Bumped on any incompatible change.
 */
#define GS_ABI_VERSION 1

/**
 * Pseudoinverse representative.
 */
typedef enum GsPinvNormalization {
  GS_PINV_NORMALIZATION_MEAN_ZERO = 0,
  GS_PINV_NORMALIZATION_DEGREE_MEAN_ZERO = 1,
} GsPinvNormalization;

/**
 * Result code of every fallible call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Disconnected graph, unreachable nodes or solver non-convergence.
   */
  GS_STATUS_NUMERIC_FAILURE = 2,
  GS_STATUS_IO = 3,
  GS_STATUS_NULL_POINTER = 4,
  GS_STATUS_PANIC = 5,
} GsStatus;

/**
 * Opaque graph handle.
 */
typedef struct GsGraph GsGraph;

/**
 * Opaque solution handle.
 */
typedef struct GsSolution GsSolution;

/**
 * Solver settings. `max_iter == 0` selects the default cap of 10 n.
 */
typedef struct GsSolverConfig {
  double rel_tol;
  size_t max_iter;
  enum GsPinvNormalization pinv_normalization;
} GsSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns [`GS_ABI_VERSION`].
 */
uint32_t gs_abi_version(void);

/**
 * Default solver settings (relative tolerance 1e-10, cap 10 n, mean-zero).
 */
struct GsSolverConfig gs_solver_config_default(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *gs_last_error_message(void);

/**
 * Loads a graph from an edge-list file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum GsStatus gs_graph_load(const char *path, struct GsGraph **out);

/**
 * Builds a graph from `m` undirected edges `(src[k], dst[k], weight[k])`.
 *
 * # Safety
 * The three arrays must hold `m` elements each; `out` must be writable.
 */
enum GsStatus gs_graph_from_edges(size_t n,
                                  const size_t *src,
                                  const size_t *dst,
                                  const double *weight,
                                  size_t m,
                                  struct GsGraph **out);

/**
 * Releases a graph. Null is ignored.
 *
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void gs_graph_free(struct GsGraph *graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t gs_graph_node_count(const struct GsGraph *graph);

/**
 * Harmonic extension of the `m` labels. `cfg` may be null for defaults.
 *
 * # Safety
 * `label_idx` and `label_val` must hold `m` elements; `out` must be writable.
 */
enum GsStatus gs_laplace_learn(const struct GsGraph *graph,
                               const size_t *label_idx,
                               const double *label_val,
                               size_t m,
                               const struct GsSolverConfig *cfg,
                               struct GsSolution **out);

/**
 * Soft-constrained fit with data weight `lambda`. A nonzero `full_mask`
 * applies the loss to every node instead of the labeled ones only.
 *
 * # Safety
 * As for [`gs_laplace_learn`].
 */
enum GsStatus gs_laplace_regularize(const struct GsGraph *graph,
                                    const size_t *label_idx,
                                    const double *label_val,
                                    size_t m,
                                    double lambda,
                                    int32_t full_mask,
                                    const struct GsSolverConfig *cfg,
                                    struct GsSolution **out);

/**
 * Poisson scores: pseudoinverse applied to centered label sources.
 *
 * # Safety
 * As for [`gs_laplace_learn`].
 */
enum GsStatus gs_poisson_learn(const struct GsGraph *graph,
                               const size_t *label_idx,
                               const double *label_val,
                               size_t m,
                               const struct GsSolverConfig *cfg,
                               struct GsSolution **out);

/**
 * Releases a solution. Null is ignored.
 *
 * # Safety
 * `sol` must come from this library and not be used afterwards.
 */
void gs_solution_free(struct GsSolution *sol);

/**
 * Number of scores, or 0 for a null handle.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t gs_solution_len(const struct GsSolution *sol);

/**
 * Additive constant of the kernel form, or NaN for a null handle.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
double gs_solution_offset(const struct GsSolution *sol);

/**
 * Solver iterations used, or 0 for a null handle.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t gs_solution_iterations(const struct GsSolution *sol);

/**
 * Copies the scores into `out`, which must have room for `len` values;
 * `len` must equal [`gs_solution_len`].
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum GsStatus gs_solution_scores(const struct GsSolution *sol, double *out, size_t len);

/**
 * Serializes the solution to JSON. Release the string with
 * [`gs_string_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum GsStatus gs_solution_to_json(const struct GsSolution *sol, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void gs_string_free(char *s);

/**
 * Commute time between nodes `i` and `j`.
 *
 * # Safety
 * `out` must be writable; `cfg` may be null.
 */
enum GsStatus gs_commute_time(const struct GsGraph *graph,
                              size_t i,
                              size_t j,
                              const struct GsSolverConfig *cfg,
                              double *out);

/**
 * Area under the ROC curve of `scores` against `truth` (nonzero = positive).
 *
 * # Safety
 * Both arrays must hold `len` elements; `out` must be writable.
 */
enum GsStatus gs_auc(const double *scores, const uint8_t *truth, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHSSL_H */
