#ifndef RECOM_H
#define RECOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RecomStatus {
  RECOM_STATUS_OK = 0,
  RECOM_STATUS_NULL_POINTER = 1,
  RECOM_STATUS_INVALID_ARGUMENT = 2,
  RECOM_STATUS_DATA_ERROR = 3,
  RECOM_STATUS_CHAIN_ERROR = 4,
  RECOM_STATUS_PANIC = 5,
} RecomStatus;

// A validated dual graph.
typedef struct RecomGraph RecomGraph;

// A finished ensemble.
typedef struct RecomRun RecomRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failed call on this thread, or an empty
// string. Valid until the next call into this library on the same thread.
const char *recom_last_error(void);

// Library version as a static NUL-terminated string.
const char *recom_version(void);

// Loads a node-link graph file, using the contests in its metadata.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RecomStatus recom_graph_load(const char *path, struct RecomGraph **out);

// Builds a graph from flat arrays. Edge `i` joins `edge_src[i]` and
// `edge_dst[i]`. `dem` and `rep` may both be null (no contest) or both
// point at `n_nodes` vote counts for a single contest named "C0".
//
// # Safety
// Every non-null pointer must reference an array of the stated length.
enum RecomStatus recom_graph_from_arrays(size_t n_nodes,
                                         const uint64_t *populations,
                                         size_t n_edges,
                                         const uint32_t *edge_src,
                                         const uint32_t *edge_dst,
                                         const int64_t *dem,
                                         const int64_t *rep,
                                         struct RecomGraph **out);

// # Safety
// `graph` must come from this library and not be used afterwards.
void recom_graph_free(struct RecomGraph *graph);

// # Safety
// `graph` must be null or a live handle.
size_t recom_graph_node_count(const struct RecomGraph *graph);

// # Safety
// `graph` must be null or a live handle.
uint64_t recom_graph_total_population(const struct RecomGraph *graph);

// # Safety
// `graph` must be null or a live handle.
size_t recom_graph_contest_count(const struct RecomGraph *graph);

// Democratic two-party share of contest `contest` over the whole graph.
//
// # Safety
// `graph` must be a live handle; `out` must be writable.
enum RecomStatus recom_statewide_share(const struct RecomGraph *graph, size_t contest, double *out);

// Runs one ensemble of `steps` recorded plans with `k` districts. The run
// seed is derived from `seed` exactly as the `recom run` command does, so
// the same inputs give the same ensemble. `tie_policy`: 0 count_rep,
// 1 count_dem, 2 count_half.
//
// # Safety
// `graph` must be a live handle; `out` must be writable.
enum RecomStatus recom_run_chain(const struct RecomGraph *graph,
                                 uint32_t k,
                                 double epsilon,
                                 uint64_t steps,
                                 uint64_t seed,
                                 uint32_t tie_policy,
                                 struct RecomRun **out);

// # Safety
// `run` must come from this library and not be used afterwards.
void recom_run_free(struct RecomRun *run);

// Number of recorded plans.
//
// # Safety
// `run` must be null or a live handle.
uint64_t recom_run_observations(const struct RecomRun *run);

// Copies the seed plan's district labels into `out[0..len]`; `len` must
// equal the graph's node count.
//
// # Safety
// `run` must be a live handle; `out` must hold `len` values.
enum RecomStatus recom_run_seed_plan(const struct RecomRun *run, uint32_t *out, size_t len);

// Copies the Democratic seat series of `contest` in half-seat units into
// `out[0..len]`; `len` must equal the number of recorded plans.
//
// # Safety
// `run` must be a live handle; `out` must hold `len` values.
enum RecomStatus recom_run_seat_halves(const struct RecomRun *run,
                                       size_t contest,
                                       uint32_t *out,
                                       size_t len);

// Histogram of Democratic seats for `contest`: `out[h]` counts plans with
// `h` half-seats, so `len` must be `2k + 1`.
//
// # Safety
// `run` must be a live handle; `out` must hold `len` values.
enum RecomStatus recom_run_histogram(const struct RecomRun *run,
                                     size_t contest,
                                     uint64_t *out,
                                     size_t len);

// `(S − ½) − 2(V − ½)`.
double recom_efficiency_gap_simplified(double seat_share, double vote_share);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECOM_H */
