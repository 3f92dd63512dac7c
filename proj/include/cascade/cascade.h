/* SPDX-License-Identifier: Apache-2.0 */
#ifndef CASCADE_CASCADE_H
#define CASCADE_CASCADE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CASCADE_API __declspec(dllexport)
#else
#define CASCADE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Nonzero values match the library's internal error codes. */
typedef enum cascade_status {
  CASCADE_OK = 0,
  CASCADE_INVALID_ARGUMENT = 1,
  CASCADE_NON_FINITE,
  CASCADE_MISSING_QUANT_PARAMS,
  CASCADE_INVALID_CONFIG,
  CASCADE_INPUT_TOO_LONG,
  CASCADE_TOKEN_OUT_OF_RANGE,
  CASCADE_SHAPE_MISMATCH,
  CASCADE_ALIASED_FREQUENCY,
  CASCADE_TOO_SHORT,
  CASCADE_EMPTY_REFERENCE,
  CASCADE_EMPTY_SEQUENCE,
  CASCADE_TOO_MANY_DIMS,
  CASCADE_DIM_OVERFLOW,
  CASCADE_BAD_MAGIC,
  CASCADE_UNSUPPORTED_VERSION,
  CASCADE_CRC_MISMATCH,
  CASCADE_TRUNCATED,
  CASCADE_UNKNOWN_ENUM,
  CASCADE_CONNECTION_FAILED,
  CASCADE_HANDLER_ERROR,
  CASCADE_BIND_FAILED,
  CASCADE_NON_POSITIVE_CLOCK,
  CASCADE_FILE_NOT_FOUND,
  CASCADE_PARSE_ERROR,
  CASCADE_EMPTY_FLEET,
  CASCADE_BAD_EDGES,
  CASCADE_IO_ERROR,
  CASCADE_INTERNAL = 100
} cascade_status;

typedef enum cascade_task { CASCADE_TASK_STT = 1, CASCADE_TASK_TTS = 2 } cascade_task;

typedef struct cascade_model cascade_model;
typedef struct cascade_result cascade_result;
typedef struct cascade_server cascade_server;

/* Message for the last failing call on this thread; never NULL. */
CASCADE_API const char* cascade_last_error(void);
CASCADE_API const char* cascade_status_name(int status);
/* Frees strings returned through char** out-parameters. */
CASCADE_API void cascade_string_free(char* s);

/* config_path may be NULL for the bundled defaults. seed < 0 keeps the
 * configured seed. */
CASCADE_API int cascade_model_create(const char* config_path, int task, int64_t seed,
                                     cascade_model** out);
CASCADE_API void cascade_model_free(cascade_model* model);
/* JSON: parameter counts, edge fraction, FP32 and INT8 edge bytes. */
CASCADE_API int cascade_model_describe(const cascade_model* model, char** json_out);

typedef struct cascade_run_options {
  /* "host:port" of a running service. Takes precedence over the virtual link. */
  const char* cloud_addr;
  /* > 0 selects an in-process virtual link at this bandwidth. With neither
   * set the run is edge-only. */
  double virtual_bandwidth_kbs;
  /* Bandwidth cap for the real link, KB/s. */
  double real_bandwidth_kbs;
  double rtt_s;
  int force_escalate;
  int has_stt_threshold;
  double stt_threshold;
  int has_tts_threshold;
  double tts_threshold;
} cascade_run_options;

CASCADE_API void cascade_run_options_init(cascade_run_options* opts);

CASCADE_API int cascade_run_stt_wav(const cascade_model* model, const char* wav_path,
                                    const cascade_run_options* opts, cascade_result** out);
CASCADE_API int cascade_run_stt_samples(const cascade_model* model, const float* samples,
                                        size_t n_samples, uint32_t sample_rate,
                                        const cascade_run_options* opts, cascade_result** out);
CASCADE_API int cascade_run_tts(const cascade_model* model, const char* text,
                                const cascade_run_options* opts, cascade_result** out);

CASCADE_API int cascade_result_escalated(const cascade_result* r);
CASCADE_API int cascade_result_degraded(const cascade_result* r);
/* STT token ids; the pointer stays valid until the result is freed. */
CASCADE_API int cascade_result_tokens(const cascade_result* r, const int32_t** tokens,
                                      size_t* n_tokens);
/* TTS audio. */
CASCADE_API int cascade_result_write_wav(const cascade_result* r, const char* path);
CASCADE_API int cascade_result_trace_json(const cascade_result* r, char** json_out);
CASCADE_API void cascade_result_free(cascade_result* r);

/* Forced-escalation virtual sweep. STT input comes from wav_path, TTS input
 * from text; NULL uses the long built-in fixture. Writes csv_path plus an SVG
 * next to it when csv_path is non-NULL; csv_out (optional) receives the CSV. */
CASCADE_API int cascade_sweep(const cascade_model* model, const char* wav_path, const char* text,
                              const double* bandwidths_kbs, size_t n_bandwidths,
                              double rtt_s, const char* csv_path, char** csv_out);

/* JSON: deployment memory arithmetic plus the toy model's INT8 edge. */
CASCADE_API int cascade_quantize_report(const char* config_path, char** json_out);

typedef struct cascade_fleet_options {
  double mem_req_mb;  /* <= 0: 149 */
  int task;           /* cascade_task */
  double input_length; /* <= 0: longest reference length */
  double t_max_s;     /* <= 0: CPU time at the reference clock */
  int unweighted;
} cascade_fleet_options;

CASCADE_API void cascade_fleet_options_init(cascade_fleet_options* opts);
/* Writes CSV and SVG files into report_dir; summary_json (optional) gets
 * the headline numbers. */
CASCADE_API int cascade_fleet_report(const char* data_path, const char* report_dir,
                                     const cascade_fleet_options* opts, char** summary_json);

/* Starts the cloud service in the background. listen may be NULL to use the
 * configured address. */
CASCADE_API int cascade_server_start(const char* config_path, const char* listen,
                                     int64_t seed, cascade_server** out);
CASCADE_API int cascade_server_address(const cascade_server* s, char** address_out);
CASCADE_API void cascade_server_stop(cascade_server* s);
CASCADE_API void cascade_server_free(cascade_server* s);

#ifdef __cplusplus
}
#endif

#endif /* CASCADE_CASCADE_H */
