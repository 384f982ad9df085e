/* stc: sparse tensor completion toolkit, C API.
 *
 * All functions return STC_OK or an error code; stc_last_error() gives the
 * message for the most recent failure on the calling thread. Objects are
 * opaque handles released with the matching *_free function. Strings
 * returned through char** are owned by the caller; release them with
 * stc_string_free.
 */
#ifndef STC_H
#define STC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stc_status {
  STC_OK = 0,
  STC_E_INVALID_ARGUMENT = 1,
  STC_E_PARSE = 2,
  STC_E_IO = 3,
  STC_E_BOUNDS = 4,
  STC_E_DUPLICATE_INDEX = 5,
  STC_E_NONFINITE = 6,
  STC_E_SHAPE_MISMATCH = 7,
  STC_E_EMPTY = 8,
  STC_E_INTERNAL = 9
} stc_status;

typedef struct stc_tensor stc_tensor; /* dense or sparse */
typedef struct stc_model stc_model;   /* single completion model or ensemble */
typedef struct stc_report stc_report; /* experiment report */

const char* stc_version(void);
const char* stc_status_name(stc_status status);
const char* stc_last_error(void);

/* --- tensors ------------------------------------------------------------ */

/* .sptn file I/O */
stc_status stc_tensor_read(const char* path, stc_tensor** out);
stc_status stc_tensor_write(const stc_tensor* tensor, const char* path);
/* plain CSV / JSON entry dumps; format is "csv" or "json" */
stc_status stc_tensor_import(const char* path, const char* format, stc_tensor** out);

/* Build a benchmark tensor from a generator spec (JSON text). The returned
 * metadata JSON describes axes, scaling and flags. */
stc_status stc_tensor_generate(const char* spec_json, stc_tensor** out,
                               char** metadata_json);

/* Uniform sample without replacement of round(fraction * elements) entries. */
stc_status stc_tensor_sample(const stc_tensor* dense, double fraction, uint64_t seed,
                             stc_tensor** out);

stc_status stc_tensor_order(const stc_tensor* tensor, int32_t* out);
stc_status stc_tensor_shape(const stc_tensor* tensor, int64_t* dims, int32_t capacity);
stc_status stc_tensor_entry_count(const stc_tensor* tensor, int64_t* out);
stc_status stc_tensor_is_dense(const stc_tensor* tensor, int32_t* out);
stc_status stc_tensor_name(const stc_tensor* tensor, char** out);

/* MAE / RMSE / normalized error of `predicted` against dense `truth`.
 * With `observed` non-NULL the metrics cover only the entries missing from
 * it (the completion target); otherwise they cover everything. Any output
 * pointer may be NULL. */
stc_status stc_tensor_metrics(const stc_tensor* predicted, const stc_tensor* truth,
                              const stc_tensor* observed, double* mae, double* rmse,
                              double* normalized_error);

void stc_tensor_free(stc_tensor* tensor);

/* --- models ------------------------------------------------------------- */

/* Trains whatever the config describes (single model or ensemble) on the
 * observed entries. config_json: {"method": "cpd"|"cpd-s"|"tucker"|"tt"|
 * "costco"|"ensemble", ...}. seed_override >= 0 replaces the config seed.
 * trace_csv (optional) receives the per-epoch loss table for single models. */
stc_status stc_train(const stc_tensor* observed, const char* config_json,
                     int32_t threads, int64_t seed_override, stc_model** out,
                     char** trace_csv);

stc_status stc_model_predict(const stc_model* model, const int64_t* index, int32_t order,
                             double* out);
stc_status stc_model_reconstruct(const stc_model* model, stc_tensor** out);
stc_status stc_model_save(const stc_model* model, const char* path);
stc_status stc_model_load(const char* path, stc_model** out);
void stc_model_free(stc_model* model);

/* --- experiments ---------------------------------------------------------*/

/* spec_json: {"experiment": "benchmark"|"sweep"|"lambda"|"rankscan"|
 * "crossdataset"|"timing", ...}. */
stc_status stc_run_experiment(const char* spec_json, stc_report** out);
stc_status stc_report_csv(const stc_report* report, char** out);
stc_status stc_report_json(const stc_report* report, char** out);
void stc_report_free(stc_report* report);

void stc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* STC_H */
