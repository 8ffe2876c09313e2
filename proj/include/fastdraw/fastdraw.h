/* C interface to the fastdraw lane engine.
 *
 * Every call returns an fd_status. On failure the message is available from
 * fd_last_error() on the same thread until the next failing call. Objects are
 * opaque and released with their matching *_free function. Strings returned
 * through char** are owned by the caller and released with fd_string_free.
 */
#ifndef FASTDRAW_FASTDRAW_H
#define FASTDRAW_FASTDRAW_H

#include <stddef.h>

#if defined(_WIN32)
#  ifdef FASTDRAW_BUILDING_LIBRARY
#    define FD_API __declspec(dllexport)
#  else
#    define FD_API __declspec(dllimport)
#  endif
#else
#  define FD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fd_status {
  FD_OK = 0,
  FD_ERR_INVALID_ARGUMENT = 1,
  FD_ERR_INVALID_ANNOTATION = 2,
  FD_ERR_DEGENERATE_TRANSFORM = 3,
  FD_ERR_SHAPE = 4,
  FD_ERR_INDEX = 5,
  FD_ERR_FORMAT = 6,
  FD_ERR_IO = 7,
  FD_ERR_SEED = 8,
  FD_ERR_UNSUPPORTED_SLOPE = 9,
  FD_ERR_CONFIG = 10,
  FD_ERR_DIVERGENCE = 11,
  FD_ERR_UNKNOWN_PRESET = 12,
  FD_ERR_MISMATCH = 13,
  FD_ERR_INTERNAL = 99
} fd_status;

typedef enum fd_direction { FD_DOWN = -1, FD_UP = 1 } fd_direction;

typedef struct fd_config fd_config;
typedef struct fd_field fd_field;
typedef struct fd_lanes fd_lanes;
typedef struct fd_net fd_net;

FD_API const char* fd_version(void);
FD_API const char* fd_last_error(void);
FD_API const char* fd_status_name(fd_status status);
FD_API void fd_string_free(char* s);

/* Run configuration. path may be NULL for defaults. */
FD_API fd_status fd_config_load(const char* path, fd_config** out);
/* "section.key=value"; value is JSON or a bare string. */
FD_API fd_status fd_config_set(fd_config* cfg, const char* assignment);
FD_API fd_status fd_config_to_json(const fd_config* cfg, char** out_json);
FD_API void fd_config_free(fd_config* cfg);

/* Head fields (FDT1 files). */
FD_API fd_status fd_field_load(const char* path, fd_field** out);
FD_API fd_status fd_field_save(const fd_field* field, const char* path);
FD_API fd_status fd_field_shape(const fd_field* field, int* height, int* width, int* L);
FD_API fd_status fd_field_lane_prob(const fd_field* field, int h, int w, float* out);
FD_API void fd_field_free(fd_field* field);

/* Decoding. cfg may be NULL for default decode settings. */
FD_API fd_status fd_decode(const fd_field* field, const fd_config* cfg, fd_lanes** out);
FD_API size_t fd_lanes_count(const fd_lanes* lanes);
/* Copies up to capacity points of lane i; *n receives the full length.
 * rows/cols/stds may each be NULL. */
FD_API fd_status fd_lanes_points(const fd_lanes* lanes, size_t i, int* rows, double* cols,
                                 double* stds, size_t capacity, size_t* n);
FD_API void fd_lanes_free(fd_lanes* lanes);
FD_API fd_status fd_uncertainty(const fd_field* field, int h, int w, fd_direction d, double* out);

/* Trained network. */
FD_API fd_status fd_net_load(const char* checkpoint, fd_net** out);
FD_API fd_status fd_net_predict_ppm(const fd_net* net, const char* ppm_path, fd_field** out);
FD_API void fd_net_free(fd_net* net);

/* Command-level entry points. request_json holds the command arguments
 * (see README); *out_summary receives a JSON summary and may be NULL. */
FD_API fd_status fd_cmd_generate(const fd_config* cfg, const char* out_dir, char** out_summary);
FD_API fd_status fd_cmd_train(const fd_config* cfg, const char* request_json, char** out_summary);
FD_API fd_status fd_cmd_decode(const fd_config* cfg, const char* request_json, char** out_summary);
FD_API fd_status fd_cmd_eval(const fd_config* cfg, const char* request_json, char** out_summary);
FD_API fd_status fd_cmd_agreement(const fd_config* cfg, const char* request_json,
                                  char** out_summary);

#ifdef __cplusplus
}
#endif

#endif
