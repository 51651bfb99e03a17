#ifndef SRCID_SRCID_H
#define SRCID_SRCID_H

/* C interface of the source-identification library.
 *
 * Every function returns a status code; on failure a message is available
 * from srcid_last_error() on the calling thread. Strings returned through
 * out-parameters are owned by the caller and released with srcid_string_free().
 * Handles are opaque and released with their matching *_free function. */

#include <stddef.h>

#if defined(SRCID_BUILDING_LIBRARY)
#define SRCID_API __attribute__((visibility("default")))
#else
#define SRCID_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum srcid_status {
  SRCID_OK = 0,
  SRCID_ERR_RANGE = 1,
  SRCID_ERR_CONFIG = 2,
  SRCID_ERR_INPUT = 3,
  SRCID_ERR_SHAPE = 4,
  SRCID_ERR_SINGULARITY = 5,
  SRCID_ERR_ESTIMATION = 6,
  SRCID_ERR_UNDEFINED = 7,
  SRCID_ERR_IO = 8,
  SRCID_ERR_BUSY = 9,
  SRCID_ERR_NULL_ARGUMENT = 10,
  SRCID_ERR_INTERNAL = 11
} srcid_status;

typedef struct srcid_partset srcid_partset;
typedef struct srcid_result srcid_result;
typedef struct srcid_session srcid_session;

SRCID_API const char* srcid_version(void);
SRCID_API const char* srcid_status_name(srcid_status status);
/* Message of the last failed call on this thread; empty after success. */
SRCID_API const char* srcid_last_error(void);
SRCID_API void srcid_string_free(char* s);

/* Pipeline commands. `config_json` is a pipeline configuration document;
 * relative paths in it resolve against `base_dir` (may be NULL). `out_log`
 * (may be NULL) receives a short summary. */
SRCID_API srcid_status srcid_cmd_synth(const char* config_json, const char* base_dir, char** out_log);
SRCID_API srcid_status srcid_cmd_beamform(const char* config_json, const char* base_dir, char** out_log);
SRCID_API srcid_status srcid_cmd_identify(const char* config_json, const char* base_dir, char** out_log);
SRCID_API srcid_status srcid_cmd_evaluate(const char* config_json, const char* base_dir, char** out_log);
/* Validates a pipeline configuration and returns it with defaults filled in. */
SRCID_API srcid_status srcid_config_normalize(const char* config_json, const char* base_dir, char** out_json);

/* Source-part sets loaded from a directory holding parts.csv and dataset.json. */
SRCID_API srcid_status srcid_partset_load(const char* dir, srcid_partset** out);
SRCID_API srcid_status srcid_partset_size(const srcid_partset* set, size_t* out);
SRCID_API void srcid_partset_free(srcid_partset* set);

/* Identification. `request_json` is {"method": "sind"|"sihc", "params": {...},
 * "alignment": {...}}. */
SRCID_API srcid_status srcid_identify(const srcid_partset* set, const char* request_json, srcid_result** out);
SRCID_API srcid_status srcid_result_source_count(const srcid_result* result, size_t* out);
SRCID_API srcid_status srcid_result_noise_count(const srcid_result* result, size_t* out);
SRCID_API srcid_status srcid_result_json(const srcid_result* result, char** out_json);
SRCID_API void srcid_result_free(srcid_result* result);

/* Interactive sessions and the HTTP service. */
typedef void (*srcid_ready_fn)(int port, void* user);
SRCID_API srcid_status srcid_session_open(const char* dir, srcid_session** out);
SRCID_API srcid_status srcid_session_summary(const srcid_session* session, char** out_json);
/* Blocks while serving. Port 0 picks a free port; `on_ready` (may be NULL)
 * receives the bound port. `static_dir` (may be NULL) is served at "/". */
SRCID_API srcid_status srcid_session_serve(srcid_session* session, const char* host, int port, const char* static_dir,
                                           srcid_ready_fn on_ready, void* user);
SRCID_API void srcid_session_free(srcid_session* session);

#ifdef __cplusplus
}
#endif

#endif
