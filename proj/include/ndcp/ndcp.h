#ifndef NDCP_NDCP_H
#define NDCP_NDCP_H

/* C interface to the ndcp library. All handles are opaque; every fallible
 * call returns an ndcp_status and leaves a thread-local message readable
 * through ndcp_last_error(). Strings returned through char** must be released
 * with ndcp_free_string(). */

#include <stddef.h>
#include <stdint.h>

#if defined(NDCP_BUILDING_LIBRARY)
#define NDCP_API __attribute__((visibility("default")))
#else
#define NDCP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ndcp_status {
  NDCP_OK = 0,
  NDCP_ERR_INVALID = 1,  /* bad argument or configuration */
  NDCP_ERR_IO = 2,       /* file could not be read or written */
  NDCP_ERR_PARSE = 3,    /* malformed CSV or JSON */
  NDCP_ERR_FIT = 4,      /* model fitting failed */
  NDCP_ERR_NETWORK = 5,  /* socket or protocol failure */
  NDCP_ERR_QUORUM = 6,   /* too few nodes answered */
  NDCP_ERR_INTERNAL = 7
} ndcp_status;

NDCP_API const char* ndcp_last_error(void);
NDCP_API void ndcp_free_string(char* s);
NDCP_API const char* ndcp_version(void);

/* Datasets */

typedef struct ndcp_dataset ndcp_dataset;

/* label_column: a header name, a 0-based index, or NULL/"" for the last column. */
NDCP_API ndcp_status ndcp_dataset_load_csv(const char* path, const char* label_column, ndcp_dataset** out);
/* features is row-major n x p. */
NDCP_API ndcp_status ndcp_dataset_from_arrays(const double* features, const double* labels, size_t n, size_t p,
                                              ndcp_dataset** out);
NDCP_API size_t ndcp_dataset_size(const ndcp_dataset* d);
NDCP_API size_t ndcp_dataset_feature_count(const ndcp_dataset* d);
/* features_out must hold feature_count values; either output may be NULL. */
NDCP_API ndcp_status ndcp_dataset_row(const ndcp_dataset* d, size_t i, double* features_out, double* label_out);
NDCP_API ndcp_status ndcp_dataset_split(const ndcp_dataset* d, double test_fraction, uint64_t seed,
                                        ndcp_dataset** train, ndcp_dataset** test);
/* scheme: "equal", "unequal" or "noniid". shards_out must hold k handles. */
NDCP_API ndcp_status ndcp_dataset_partition(const ndcp_dataset* d, const char* scheme, size_t k, uint64_t seed,
                                            ndcp_dataset** shards_out);
NDCP_API ndcp_status ndcp_dataset_write_csv(const ndcp_dataset* d, const char* path);
NDCP_API void ndcp_dataset_free(ndcp_dataset* d);

/* Conformal predictors */

typedef struct ndcp_predictor ndcp_predictor;

/* config_json: predictor section of the experiment config ("predictor",
 * "conformal", "regressor"); NULL or "" for defaults. */
NDCP_API ndcp_status ndcp_predictor_fit(const ndcp_dataset* shard, const char* config_json, uint64_t seed,
                                        ndcp_predictor** out);
NDCP_API size_t ndcp_predictor_feature_count(const ndcp_predictor* p);
NDCP_API ndcp_status ndcp_predictor_interval(const ndcp_predictor* p, const double* x, size_t len, double epsilon,
                                             double* lower, double* upper);
NDCP_API ndcp_status ndcp_predictor_point(const ndcp_predictor* p, const double* x, size_t len, double* out);
NDCP_API void ndcp_predictor_free(ndcp_predictor* p);

/* Median of lowers and median of uppers. */
NDCP_API ndcp_status ndcp_combine(const double* lowers, const double* uppers, size_t k, double* lower,
                                  double* upper);

/* Network nodes */

typedef struct ndcp_node ndcp_node;

/* Starts serving immediately; bind is "HOST:PORT", port 0 picks a free one. */
NDCP_API ndcp_status ndcp_node_start(const ndcp_predictor* p, const char* bind, ndcp_node** out);
NDCP_API uint16_t ndcp_node_port(const ndcp_node* n);
NDCP_API void ndcp_node_stop(ndcp_node* n);
/* Blocks until ndcp_node_stop is called from another thread. */
NDCP_API void ndcp_node_wait(ndcp_node* n);
NDCP_API void ndcp_node_free(ndcp_node* n);

typedef struct ndcp_aggregator ndcp_aggregator;

/* Called for every chunk sent (outgoing = 1) or received (outgoing = 0). */
typedef void (*ndcp_wire_tap)(void* user, size_t node, int outgoing, const char* bytes, size_t len);

/* quorum 0 means every node must answer. tap may be NULL. */
NDCP_API ndcp_status ndcp_aggregator_create(const char* const* addresses, size_t count, uint32_t timeout_ms,
                                            size_t quorum, ndcp_wire_tap tap, void* tap_user,
                                            ndcp_aggregator** out);
NDCP_API ndcp_status ndcp_aggregator_predict(ndcp_aggregator* a, const double* x, size_t len, double epsilon,
                                             double* lower, double* upper, size_t* responders);
NDCP_API void ndcp_aggregator_free(ndcp_aggregator* a);

/* Experiments */

typedef struct ndcp_report ndcp_report;
typedef void (*ndcp_progress_fn)(void* user, size_t done, size_t total);

/* Effective configuration (defaults filled in) as JSON. */
NDCP_API ndcp_status ndcp_experiment_config_resolve(const char* config_json, char** out_json);
NDCP_API ndcp_status ndcp_experiment_run(const char* config_json, ndcp_progress_fn progress, void* user,
                                         ndcp_report** out);
NDCP_API ndcp_status ndcp_report_write_json(const ndcp_report* r, const char* path);
NDCP_API ndcp_status ndcp_report_write_csv(const ndcp_report* r, const char* path);
NDCP_API ndcp_status ndcp_report_summary(const ndcp_report* r, char** out);
NDCP_API ndcp_status ndcp_report_to_json(const ndcp_report* r, char** out);
NDCP_API void ndcp_report_free(ndcp_report* r);

#ifdef __cplusplus
}
#endif

#endif
