#ifndef GRAPH_ANNOTATE_H
#define GRAPH_ANNOTATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GaStatus {
  GA_STATUS_OK = 0,
  GA_STATUS_NULL_POINTER = 1,
  GA_STATUS_INVALID_ARGUMENT = 2,
  GA_STATUS_IO = 3,
  GA_STATUS_PARSE = 4,
  GA_STATUS_NO_CONVERGENCE = 5,
  GA_STATUS_BUFFER_TOO_SMALL = 6,
  GA_STATUS_PANIC = 7,
  GA_STATUS_OTHER = 8,
} GaStatus;

typedef enum GaEdgeSemantics {
  GA_EDGE_SEMANTICS_CITING_TO_CITED = 0,
  GA_EDGE_SEMANTICS_CITED_TO_CITING = 1,
} GaEdgeSemantics;

typedef enum GaRole {
  GA_ROLE_CENTER = 0,
  GA_ROLE_PRED = 1,
  GA_ROLE_SUCC = 2,
  GA_ROLE_PRED_OF_PRED = 3,
  GA_ROLE_PRED_OF_SUCC = 4,
  GA_ROLE_SUCC_OF_PRED = 5,
  GA_ROLE_SUCC_OF_SUCC = 6,
} GaRole;

/**
 * Opaque graph handle.
 */
typedef struct GaGraph GaGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *ga_last_error(void);

/**
 * Loads `.content` and `.cites` files (and optionally a texts file, which may
 * be null) into a new graph handle stored in `*out`.
 *
 * # Safety
 * Path arguments must be null or valid NUL-terminated strings; `out` must be
 * writable.
 */
enum GaStatus ga_graph_load(const char *content_path,
                            const char *cites_path,
                            const char *texts_path,
                            enum GaEdgeSemantics semantics,
                            struct GaGraph **out);

/**
 * Releases a handle from [`ga_graph_load`]. Null is ignored.
 *
 * # Safety
 * `graph` must come from [`ga_graph_load`] and not be freed twice.
 */
void ga_graph_free(struct GaGraph *graph);

/**
 * Node, edge, class and feature counts. Any output pointer may be null.
 *
 * # Safety
 * `graph` must be a live handle; non-null outputs must be writable.
 */
enum GaStatus ga_graph_counts(const struct GaGraph *graph,
                              size_t *nodes,
                              size_t *edges,
                              size_t *classes,
                              size_t *feature_dim);

/**
 * Members and roles of homophily tie `k` (0..=7) around `node`. Writes
 * `*len`; fills `members`/`roles` only when `len <= cap`.
 *
 * # Safety
 * `graph` must be live; `members` and `roles` must hold `cap` elements
 * (they may be null when `cap` is 0); `len` must be writable.
 */
enum GaStatus ga_graph_tie(const struct GaGraph *graph,
                           size_t node,
                           size_t k,
                           size_t *members,
                           enum GaRole *roles,
                           size_t cap,
                           size_t *len);

/**
 * PageRank with the given damping (tolerance 1e-8, at most 1000
 * iterations). `out` must hold one value per node.
 *
 * # Safety
 * `graph` must be live; `out` must hold `len` doubles.
 */
enum GaStatus ga_pagerank(const struct GaGraph *graph, double damping, double *out, size_t len);

/**
 * Diagonal and off-diagonal entries of the h-step label transition matrix.
 *
 * # Safety
 * `diag` and `off_diag` must be writable.
 */
enum GaStatus ga_q_power(double alpha, size_t classes, uint32_t h, double *diag, double *off_diag);

/**
 * `(alpha - beta)^h` and whether it is strictly positive.
 *
 * # Safety
 * `gap` and `dominant` must be writable.
 */
enum GaStatus ga_dominance_gap(double alpha,
                               size_t classes,
                               uint32_t h,
                               double *gap,
                               bool *dominant);

/**
 * Parses a model reply into ranked guesses. `labels[i]` is the class index
 * into `class_names`, `confidences[i]` the 0..=100 confidence. Writes
 * `*len`; fills the arrays only when `len <= cap`.
 *
 * # Safety
 * `text` and each of the `num_classes` entries of `class_names` must be valid
 * NUL-terminated strings; output arrays must hold `cap` elements.
 */
enum GaStatus ga_parse_response(const char *text,
                                const char *const *class_names,
                                size_t num_classes,
                                size_t *labels,
                                uint32_t *confidences,
                                size_t cap,
                                size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_ANNOTATE_H */
