#ifndef GRAPHSMOTE_H
#define GRAPHSMOTE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_IO = 3,
  GS_STATUS_PARSE = 4,
  // Non-finite values during training.
  GS_STATUS_NUMERIC = 5,
  GS_STATUS_TRAINING = 6,
  // A Rust panic was caught at the boundary.
  GS_STATUS_PANIC = 7,
} GsStatus;

typedef struct GsConfig GsConfig;

typedef struct GsGraph GsGraph;

typedef struct GsRun GsRun;

// Headline metrics. `auc_macro` is NaN when no class has both positive and
// negative nodes.
typedef struct GsMetrics {
  double acc;
  double auc_macro;
  double f_macro;
} GsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gs_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *gs_last_error_message(void);

// Loads `edges.tsv`, `features.txt` and `labels.txt` from `dir`.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum GsStatus gs_graph_load(const char *dir, struct GsGraph **out);

// Generates a stochastic-block-model graph with `num_classes` blocks.
//
// # Safety
// `sizes` must point to `num_classes` values; `out` must be writable.
enum GsStatus gs_graph_sbm(const size_t *sizes,
                           size_t num_classes,
                           double p_in,
                           double p_out,
                           size_t dim,
                           uint64_t seed,
                           struct GsGraph **out);

// # Safety
// `g` must be a live handle or NULL (returns 0).
size_t gs_graph_num_nodes(const struct GsGraph *g);

// # Safety
// `g` must be a live handle or NULL (returns 0).
size_t gs_graph_num_classes(const struct GsGraph *g);

// # Safety
// `g` must come from this library and not be used afterwards.
void gs_graph_free(struct GsGraph *g);

// Training configuration with default values.
//
// # Safety
// `out` must be writable.
enum GsStatus gs_config_new(struct GsConfig **out);

// Sets one training key, using the names of the configuration file
// (`variant`, `lambda`, `max_epochs`, ...).
//
// # Safety
// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
enum GsStatus gs_config_set(struct GsConfig *cfg, const char *key, const char *value);

// # Safety
// `cfg` must come from this library and not be used afterwards.
void gs_config_free(struct GsConfig *cfg);

// Trains on a stratified split drawn from the configured seed; the rest of
// the labeled nodes after train and validation form the test set.
//
// # Safety
// `g` and `cfg` must be live handles; `out` must be writable.
enum GsStatus gs_train(const struct GsGraph *g,
                       const struct GsConfig *cfg,
                       double train_fraction,
                       double val_fraction,
                       struct GsRun **out);

// Test-set metrics of the best checkpoint.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum GsStatus gs_run_test_metrics(const struct GsRun *run, struct GsMetrics *out);

// # Safety
// `run` must be a live handle or NULL (returns 0).
size_t gs_run_num_epochs(const struct GsRun *run);

// Number of test nodes in the run's split.
//
// # Safety
// `run` must be a live handle or NULL (returns 0).
size_t gs_run_num_test(const struct GsRun *run);

// Copies the `nodes × classes` probability matrix, row-major, into `buf`.
// `len` is the capacity of `buf` in elements.
//
// # Safety
// `run` must be a live handle; `buf` must hold `len` doubles.
enum GsStatus gs_run_probabilities(const struct GsRun *run, double *buf, size_t len);

// # Safety
// `run` must come from this library and not be used afterwards.
void gs_run_free(struct GsRun *run);

// Scores an `n × m` row-major probability matrix against `labels`; a
// negative label marks a node to leave out.
//
// # Safety
// `probs` must hold `n * m` doubles, `labels` `n` values; `out` writable.
enum GsStatus gs_metrics_compute(const double *probs,
                                 size_t n,
                                 size_t m,
                                 const int64_t *labels,
                                 struct GsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHSMOTE_H */
