#ifndef RDUCB_H
#define RDUCB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RducbStatus {
  RDUCB_STATUS_OK = 0,
  RDUCB_STATUS_INVALID_PARAMETER = 1,
  RDUCB_STATUS_NULL_POINTER = 2,
  RDUCB_STATUS_NUMERICAL = 3,
  RDUCB_STATUS_RESOURCE = 4,
  RDUCB_STATUS_BLACK_BOX = 5,
  RDUCB_STATUS_IO = 6,
  RDUCB_STATUS_PARSE = 7,
  RDUCB_STATUS_PANIC = 8,
} RducbStatus;

typedef enum RducbStrategy {
  RDUCB_STRATEGY_RDUCB = 0,
  RDUCB_STRATEGY_RANDOM_SEARCH = 1,
  RDUCB_STRATEGY_FIXED_TREE = 2,
  RDUCB_STRATEGY_ML_TREE = 3,
} RducbStrategy;

typedef enum RducbAcquisition {
  RDUCB_ACQUISITION_ADD_UCB = 0,
  RDUCB_ACQUISITION_ADD_EI = 1,
} RducbAcquisition;

typedef enum RducbSense {
  RDUCB_SENSE_MINIMIZE = 0,
  RDUCB_SENSE_MAXIMIZE = 1,
} RducbSense;

typedef struct RducbBenchmark RducbBenchmark;

typedef struct RducbDecomposition RducbDecomposition;

typedef struct RducbTrace RducbTrace;

// Settings for one optimisation run. Fill with
// [`rducb_run_options_default`] and override fields as needed.
typedef struct RducbRunOptions {
  enum RducbStrategy strategy;
  enum RducbAcquisition acquisition;
  // Total evaluations, initial design included.
  size_t budget;
  size_t n_init;
  // Tree edge count; negative selects max(⌊d/5⌋, 1).
  int64_t edges;
  // Constant exploration weight; NaN selects ½ ln(2t).
  double beta;
  size_t grid_size;
  bool refine;
  uint64_t seed;
  // Record per-round wall time.
  bool timing;
} RducbRunOptions;

// Writes `f(x)` to `*y` and returns 0, or returns nonzero to abort the run.
typedef int (*RducbObjectiveFn)(const double *x, size_t d, void *user_data, double *y);

// One round of a trace. Values that do not apply are NaN.
typedef struct RducbRound {
  size_t round;
  bool is_init;
  double y;
  double best_y;
  double inst_regret;
  double best_regret;
  double beta;
  double wall_ms;
} RducbRound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *rducb_last_error(void);

// Library version as a static string.
const char *rducb_version(void);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void rducb_string_free(char *s);

// Default edge count for dimension `d`.
//
// # Safety
// `out` must be valid for writes.
enum RducbStatus rducb_edges_for_dim(size_t d, size_t *out);

// Exploration weight ½ ln(2t) for round `t ≥ 1`.
//
// # Safety
// `out` must be valid for writes.
enum RducbStatus rducb_beta(size_t t, double *out);

// Samples a random tree decomposition of `d` dimensions with `e` edges.
//
// # Safety
// `out` must be valid for writes.
enum RducbStatus rducb_decomposition_sample(size_t d,
                                            size_t e,
                                            uint64_t seed,
                                            struct RducbDecomposition **out);

// The tree a run with master seed `seed` samples at round `round`.
//
// # Safety
// `out` must be valid for writes.
enum RducbStatus rducb_decomposition_sample_round(size_t d,
                                                  size_t e,
                                                  uint64_t seed,
                                                  uint64_t round,
                                                  struct RducbDecomposition **out);

// Parses `1,2;3` or one component per line. The result is not validated.
//
// # Safety
// `text` must be a NUL-terminated string and `out` valid for writes.
enum RducbStatus rducb_decomposition_parse(size_t d,
                                           const char *text,
                                           struct RducbDecomposition **out);

// `RDUCB_STATUS_OK` when the decomposition is a valid tree decomposition.
//
// # Safety
// `g` must be a live handle.
enum RducbStatus rducb_decomposition_validate(const struct RducbDecomposition *g);

// # Safety
// `g` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_decomposition_num_edges(const struct RducbDecomposition *g, size_t *out);

// Compact form, e.g. `1,2;3;4`. Free with [`rducb_string_free`].
//
// # Safety
// `g` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_decomposition_to_string(const struct RducbDecomposition *g, char **out);

// # Safety
// `g` must be null or a live handle, freed once.
void rducb_decomposition_free(struct RducbDecomposition *g);

// Creates a synthetic benchmark such as `stybtang` or `hartmann6`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` valid for writes.
enum RducbStatus rducb_benchmark_new(const char *name, size_t d, struct RducbBenchmark **out);

// # Safety
// `b` must be a live handle, `x` must hold `len` values and `out` be valid
// for writes.
enum RducbStatus rducb_benchmark_eval(const struct RducbBenchmark *b,
                                      const double *x,
                                      size_t len,
                                      double *out);

// Known optimal value of the benchmark.
//
// # Safety
// `b` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_benchmark_optimum(const struct RducbBenchmark *b, double *out);

// # Safety
// `b` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_benchmark_dim(const struct RducbBenchmark *b, size_t *out);

// # Safety
// `b` must be null or a live handle, freed once.
void rducb_benchmark_free(struct RducbBenchmark *b);

// # Safety
// `out` must be valid for writes.
enum RducbStatus rducb_run_options_default(struct RducbRunOptions *out);

// Optimises a synthetic benchmark. On a failing status `*out` may still
// hold a partial trace; free it either way.
//
// # Safety
// `b` must be a live handle, `options` readable and `out` valid for writes.
enum RducbStatus rducb_run_benchmark(const struct RducbBenchmark *b,
                                     const struct RducbRunOptions *options,
                                     struct RducbTrace **out);

// Optimises a caller-supplied function over the box `[lower, upper]`.
// `optimum` may be null when the optimal value is unknown. On a failing
// status `*out` may still hold a partial trace; free it either way.
//
// # Safety
// `lower` and `upper` must hold `d` values, `f` must be safe to call with
// `user_data` from the calling thread, `options` readable and `out` valid
// for writes.
enum RducbStatus rducb_run_callback(RducbObjectiveFn f,
                                    void *user_data,
                                    const double *lower,
                                    const double *upper,
                                    size_t d,
                                    enum RducbSense sense,
                                    const double *optimum,
                                    const struct RducbRunOptions *options,
                                    struct RducbTrace **out);

// # Safety
// `t` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_trace_len(const struct RducbTrace *t, size_t *out);

// # Safety
// `t` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_trace_dim(const struct RducbTrace *t, size_t *out);

// Round `i` (0-based) of the trace.
//
// # Safety
// `t` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_trace_round(const struct RducbTrace *t, size_t i, struct RducbRound *out);

// Copies the query point of round `i` into `x`, which holds `len ≥ d` values.
//
// # Safety
// `t` must be a live handle and `x` valid for `len` writes.
enum RducbStatus rducb_trace_x(const struct RducbTrace *t, size_t i, double *x, size_t len);

// Decomposition used at round `i`; an empty string for initial-design
// rounds. Free with [`rducb_string_free`].
//
// # Safety
// `t` must be a live handle and `out` valid for writes.
enum RducbStatus rducb_trace_decomposition(const struct RducbTrace *t, size_t i, char **out);

// Writes the trace in the same CSV layout as the command-line tool.
//
// # Safety
// `t` must be a live handle and `path` a NUL-terminated string.
enum RducbStatus rducb_trace_write_csv(const struct RducbTrace *t, const char *path);

// # Safety
// `t` must be null or a live handle, freed once.
void rducb_trace_free(struct RducbTrace *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDUCB_H */
