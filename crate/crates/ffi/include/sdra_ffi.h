#ifndef SDRA_FFI_H
#define SDRA_FFI_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SdraStatus {
  SDRA_STATUS_OK = 0,
  SDRA_STATUS_NULL_POINTER = 1,
  SDRA_STATUS_INVALID_PARAMETER = 2,
  SDRA_STATUS_CAPACITY = 3,
  SDRA_STATUS_STRUCTURAL = 4,
  SDRA_STATUS_CONTRACT = 5,
  SDRA_STATUS_IO = 6,
  SDRA_STATUS_PARSE = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  SDRA_STATUS_INTERNAL = 8,
} SdraStatus;

typedef enum SdraMode {
  SDRA_MODE_FULL_DRA = 0,
  SDRA_MODE_RDRA = 1,
  SDRA_MODE_SDRA = 2,
} SdraMode;

typedef enum SdraStrategy {
  SDRA_STRATEGY_OFFLINE = 0,
  SDRA_STRATEGY_CCM = 1,
  SDRA_STRATEGY_CCM_STAR = 2,
  SDRA_STRATEGY_MEAN = 3,
  SDRA_STRATEGY_MEDIAN = 4,
} SdraStrategy;

typedef enum SdraEnd {
  SDRA_END_EXTINCT = 0,
  SDRA_END_ABSORBED = 1,
  SDRA_END_CENSORED_TIME = 2,
  SDRA_END_CENSORED_EVENTS = 3,
} SdraEnd;

/**
 * Opaque graph handle.
 */
typedef struct SdraGraph SdraGraph;

/**
 * Opaque trajectory handle.
 */
typedef struct SdraTrajectory SdraTrajectory;

/**
 * Parameters of one controlled replica.
 */
typedef struct SdraRunParams {
  double beta;
  double rho;
  double delta;
  size_t budget;
  enum SdraMode mode;
  enum SdraStrategy strategy;
  /**
   * Fixed cutoff for `Ccm`; negative selects `round(sqrt(n)) - 1`.
   */
  int64_t cutoff;
  double sample_ratio;
  uint64_t seed;
  uint64_t replica;
  /**
   * Non-positive means no time cap.
   */
  double max_time;
  size_t max_events;
  /**
   * Monte Carlo instances per cutoff-table entry (`CcmStar` only).
   */
  size_t cutoff_mc;
} SdraRunParams;

typedef struct SdraEvent {
  double t;
  size_t node;
  /**
   * 1 for an infection, 0 for a recovery.
   */
  uint8_t infection;
  size_t n_infected;
} SdraEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *sdra_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sdra_version(void);

/**
 * Builds a graph from `n_edges` pairs stored flat in `edges`
 * (`u0, v0, u1, v1, ...`).
 *
 * # Safety
 * `edges` must be valid for `2 * n_edges` reads and `out` for one write.
 */
enum SdraStatus sdra_graph_from_edges(size_t n_nodes,
                                      const size_t *edges,
                                      size_t n_edges,
                                      struct SdraGraph **out);

/**
 * Watts–Strogatz graph; same output as the CLI for the same `graph_seed`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SdraStatus sdra_graph_small_world(size_t n_nodes,
                                       size_t m,
                                       double p_rewire,
                                       uint64_t seed,
                                       struct SdraGraph **out);

/**
 * Barabási–Albert graph; same output as the CLI for the same `graph_seed`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SdraStatus sdra_graph_scale_free(size_t n_nodes,
                                      size_t m,
                                      uint64_t seed,
                                      struct SdraGraph **out);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t sdra_graph_n_nodes(const struct SdraGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t sdra_graph_n_edges(const struct SdraGraph *graph);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void sdra_graph_free(struct SdraGraph *graph);

/**
 * Parameters with no cap, full DRA and a zero seed.
 */
struct SdraRunParams sdra_run_params_default(void);

/**
 * Simulates one controlled replica from the infection vector `x0`
 * (`n_nodes` bytes, nonzero = infected).
 *
 * # Safety
 * `graph` and `params` must be live, `x0` valid for `n_nodes(graph)`
 * reads and `out` valid for one write.
 */
enum SdraStatus sdra_simulate(const struct SdraGraph *graph,
                              const struct SdraRunParams *params,
                              const uint8_t *x0,
                              struct SdraTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t sdra_trajectory_n_events(const struct SdraTrajectory *traj);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t sdra_trajectory_n_rounds(const struct SdraTrajectory *traj);

/**
 * Time at which the run ended (extinction, absorption or the cap).
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
double sdra_trajectory_end_time(const struct SdraTrajectory *traj);

/**
 * # Safety
 * `traj` must be live and `out` valid for one write.
 */
enum SdraStatus sdra_trajectory_end(const struct SdraTrajectory *traj, enum SdraEnd *out);

/**
 * Copies event `index` into `out`.
 *
 * # Safety
 * `traj` must be live and `out` valid for one write.
 */
enum SdraStatus sdra_trajectory_event(const struct SdraTrajectory *traj,
                                      size_t index,
                                      struct SdraEvent *out);

/**
 * Number of infected nodes at each of the `n_grid` times in `grid`
 * (last value carried forward).
 *
 * # Safety
 * `traj` must be live, `grid` valid for `n_grid` reads and `out` for
 * `n_grid` writes.
 */
enum SdraStatus sdra_trajectory_infected_on_grid(const struct SdraTrajectory *traj,
                                                 const double *grid,
                                                 size_t n_grid,
                                                 size_t *out);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void sdra_trajectory_free(struct SdraTrajectory *traj);

/**
 * Runs one selection round on raw scores. `pre` holds the `b` preselected
 * scores (NaN marks an entry that no longer needs its resource) and
 * `cand` the candidates in arrival order. Writes one accept flag per
 * candidate and the cost of the final allocation.
 *
 * # Safety
 * `pre` must be valid for `b` reads, `cand` for `n` reads, `accept` for
 * `n` writes and `cost` for one write.
 */
enum SdraStatus sdra_run_strategy(const double *pre,
                                  size_t b,
                                  const double *cand,
                                  size_t n,
                                  enum SdraStrategy strategy,
                                  int64_t cutoff,
                                  uint8_t *accept,
                                  double *cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDRA_FFI_H */
