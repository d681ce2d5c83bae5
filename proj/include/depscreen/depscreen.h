// SPDX-License-Identifier: Apache-2.0
// C interface to the depression-screening toolkit.
//
// Every function returns a ds_status. DS_OK is zero; other values identify
// the failure class and ds_last_error() holds a message for the calling
// thread. Strings returned through char** out-parameters are owned by the
// caller and released with ds_string_free. Opaque handles are released with
// their matching *_free function; passing NULL to a free function is a no-op.
#ifndef DEPSCREEN_DEPSCREEN_H
#define DEPSCREEN_DEPSCREEN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DS_API __declspec(dllexport)
#else
#define DS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ds_status {
  DS_OK = 0,
  DS_ERR_MISSING_FILE = 1,
  DS_ERR_MALFORMED_CSV,
  DS_ERR_SAMPLE_RATE_MISMATCH,
  DS_ERR_INTERVAL_OUT_OF_RANGE,
  DS_ERR_INCONSISTENT_OVERRIDE,
  DS_ERR_INVALID_FRACTION,
  DS_ERR_UNKNOWN_SPEAKER,
  DS_ERR_NO_PATIENT_SPEECH,
  DS_ERR_TOO_SHORT,
  DS_ERR_TOO_FEW_FRAMES,
  DS_ERR_ALIGNMENT_GAP,
  DS_ERR_EMPTY_TRAINING_SET,
  DS_ERR_UNBALANCED_EXEMPLARS,
  DS_ERR_VALIDATION,
  DS_ERR_BACKEND_UNAVAILABLE,
  DS_ERR_MALFORMED_AFTER_RETRIES,
  DS_ERR_AUTH_FAILURE,
  DS_ERR_SHAPE_MISMATCH,
  DS_ERR_SINGLE_CLASS,
  DS_ERR_LEAKAGE_DETECTED,
  DS_ERR_NON_FINITE_LOSS,
  DS_ERR_EMPTY_INPUT,
  DS_ERR_EMPTY_SPACE,
  DS_ERR_DEGENERATE_DENOMINATOR,
  DS_ERR_MISSING_FEATURES,
  DS_ERR_INSUFFICIENT_CORPUS,
  DS_ERR_INVALID_SIGNATURE,
  DS_ERR_MALFORMED_PAYLOAD,
  DS_ERR_QUEUE_FULL,
  DS_ERR_NOT_FOUND,
  DS_ERR_IO,
  DS_ERR_INVALID_ARGUMENT,
  DS_ERR_INTERNAL = 99
} ds_status;

typedef struct ds_config ds_config;
typedef struct ds_model ds_model;
typedef struct ds_service ds_service;

// Progress lines (human readable, no trailing newline).
typedef void (*ds_log_fn)(const char* line, void* user);

DS_API const char* ds_version(void);
DS_API const char* ds_status_name(ds_status status);
DS_API const char* ds_last_error(void);
DS_API void ds_string_free(char* s);
DS_API void ds_set_log(ds_log_fn fn, void* user);

// Configuration: a JSON file (path may be NULL for defaults) with optional
// JSON overrides merged on top (may be NULL).
DS_API ds_status ds_config_load(const char* path, const char* overrides_json, ds_config** out);
DS_API ds_status ds_config_to_json(const ds_config* config, char** out_json);
DS_API uint64_t ds_config_seed(const ds_config* config);
DS_API void ds_config_free(ds_config* config);

// Writes a synthetic corpus (n interviews, ids from 1000) plus labeled
// few-shot exemplars in the corpus directory layout.
DS_API ds_status ds_synth(const char* out_dir, int n, double depressed_fraction, uint64_t seed);

// Loads and repairs every interview under corpus_dir, normalizes the
// transcripts and writes the prepared corpus (including dialogues).
DS_API ds_status ds_prep(const ds_config* config, const char* corpus_dir, const char* out_dir);

// Segments, augments and extracts MFCC and facial action unit features from
// a prepared corpus into a feature store.
DS_API ds_status ds_features(const ds_config* config, const char* prepared_dir, const char* out_dir);

// Few-shot text classification of every prepared interview; writes a verdict
// CSV (interview_id,diagnosis,backend,cached,malformed_retries).
DS_API ds_status ds_llm_classify(const ds_config* config, const char* prepared_dir, const char* out_csv);

// Trains one fusion model on the whole feature store for `epochs` epochs
// (<= 0: the configured max_epochs) and saves a checkpoint. The summary is a
// JSON object with the per-epoch history.
DS_API ds_status ds_train(const ds_config* config, const char* features_dir, const char* verdicts_csv, int epochs,
                          const char* out_checkpoint, char** out_summary_json);

// Hyperband search over the configured space. split_dir holds the
// train/validation/test CSVs; only train and validation are used. Writes
// best_hyperparams.json and trials.csv into out_dir.
DS_API ds_status ds_tune(const ds_config* config, const char* features_dir, const char* verdicts_csv,
                         const char* split_dir, const char* out_dir, char** out_summary_json);

// Leave-one-subject-out evaluation. Writes report.txt, metrics.json,
// predictions.csv and audit.csv into out_dir.
DS_API ds_status ds_losocv(const ds_config* config, const char* features_dir, const char* verdicts_csv,
                           const char* out_dir, char** out_summary_json);

// Fixed train/validation/test split evaluation; same outputs as ds_losocv.
DS_API ds_status ds_eval_split(const ds_config* config, const char* features_dir, const char* verdicts_csv,
                               const char* split_dir, const char* out_dir, char** out_summary_json);

// Confusion-matrix metrics as JSON. reported_json (may be NULL) is a
// published row to compare against; mismatches become warnings.
DS_API ds_status ds_metrics(long tp, long fp, long fn, long tn, const char* reported_json, char** out_json);

DS_API ds_status ds_model_load(const char* checkpoint, ds_model** out);
DS_API ds_status ds_model_info(const ds_model* model, char** out_json);
DS_API void ds_model_free(ds_model* model);

// Runs the whole single-recording pipeline (no augmentation) and returns the
// report, decision and per-stage timings as JSON. source is a corpus root or
// the interview directory.
DS_API ds_status ds_process_recording(const ds_config* config, const ds_model* model, const char* source,
                                      int interview_id, char** out_json);

// Starts the webhook service (HTTP listener plus workers). host/port/report
// directory come from the config unless overridden (host NULL, port < 0,
// report_dir NULL keep the configured values; port 0 picks a free port).
// The webhook secret is read from DEPSCREEN_WEBHOOK_SECRET.
DS_API ds_status ds_service_start(const ds_config* config, const ds_model* model, const char* host, int port,
                                  const char* report_dir, ds_service** out);
DS_API int ds_service_port(const ds_service* service);
// Waits until the queue is empty and no job is running; DS_ERR_VALIDATION on
// timeout.
DS_API ds_status ds_service_wait_idle(ds_service* service, int timeout_ms);
DS_API ds_status ds_service_jobs(const ds_service* service, char** out_json);
DS_API void ds_service_free(ds_service* service);

// Posts a signed recording-completed event. With tamper != 0 the body is
// altered after signing. http_status is 0 when no response arrived.
DS_API ds_status ds_simulate_webhook(const char* base_url, const char* secret, int interview_id,
                                     const char* recording_path, int tamper, int* http_status, char** out_body);
DS_API ds_status ds_http_get(const char* base_url, const char* path, int* http_status, char** out_body);

#ifdef __cplusplus
}
#endif

#endif  // DEPSCREEN_DEPSCREEN_H
