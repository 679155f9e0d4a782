/* C interface to the occult library. Every function that can fail returns an
 * occ_status; on failure occ_last_error() describes the problem for the
 * calling thread. Objects returned through out-parameters are owned by the
 * caller and released with the matching *_free function. */
#ifndef OCCULT_OCCULT_H
#define OCCULT_OCCULT_H

#include <stddef.h>
#include <stdint.h>

#if defined(OCC_BUILDING_LIBRARY)
#define OCC_API __attribute__((visibility("default")))
#else
#define OCC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum occ_status {
  OCC_OK = 0,
  OCC_ERR_INVALID_ARGUMENT = 1,
  OCC_ERR_UNREADABLE_FILE = 2,
  OCC_ERR_UNSUPPORTED_FORMAT = 3,
  OCC_ERR_IO_FAILURE = 4,
  OCC_ERR_DEGENERATE_SIZE = 5,
  OCC_ERR_NO_FOREGROUND = 6,
  OCC_ERR_NEGATIVE_INPUT = 7,
  OCC_ERR_GRID_MISMATCH = 8,
  OCC_ERR_TOO_FEW_ANGLES = 9,
  OCC_ERR_NON_MONOTONE_WARP = 10,
  OCC_ERR_MISSING_EXTERNAL_IMAGE = 11,
  OCC_ERR_INVALID_PARAMS = 12,
  OCC_ERR_SINGLE_CLASS = 13,
  OCC_ERR_DIMENSION_MISMATCH = 14,
  OCC_ERR_EMPTY_INPUT = 15,
  OCC_ERR_WINDOW_TOO_LARGE = 16,
  OCC_ERR_LENGTH_MISMATCH = 17,
  OCC_ERR_ZERO_VARIANCE = 18,
  OCC_ERR_NUMERICAL = 19,
  OCC_ERR_INTERNAL = 100
} occ_status;

typedef enum occ_side { OCC_LEFT = 0, OCC_RIGHT = 1 } occ_side;
typedef enum occ_view { OCC_CC = 0, OCC_MLO = 1 } occ_view;
typedef enum occ_simulator { OCC_SIM_MIRROR = 0, OCC_SIM_EXTERNAL = 1 } occ_simulator;

typedef struct occ_image occ_image;       /* 1 (gray) or 3 (RGB) channels */
typedef struct occ_sinogram occ_sinogram;
typedef struct occ_rcdt occ_rcdt;
typedef struct occ_model occ_model;
typedef struct occ_config occ_config;

OCC_API const char* occ_version(void);
OCC_API const char* occ_status_name(occ_status status);
/* Message of the last failure on this thread; "" if none. */
OCC_API const char* occ_last_error(void);

/* Images. Pixel data is row-major; RGB pixels are interleaved. */
OCC_API occ_status occ_image_create(int width, int height, int channels, const double* data,
                                    occ_image** out);
OCC_API occ_status occ_image_load(const char* path, int channels, occ_image** out);
OCC_API occ_status occ_image_save(const occ_image* img, const char* path, int bit_depth);
OCC_API int occ_image_width(const occ_image* img);
OCC_API int occ_image_height(const occ_image* img);
OCC_API int occ_image_channels(const occ_image* img);
OCC_API const double* occ_image_data(const occ_image* img);
OCC_API void occ_image_free(occ_image* img);
OCC_API occ_status occ_image_resize(const occ_image* img, int width, int height, occ_image** out);
OCC_API occ_status occ_image_flip(const occ_image* img, int horizontal, occ_image** out);

/* Preprocessing. The mask is a gray image of 0/1 values; bbox receives
 * x0, y0, x1, y1 (inclusive) when not null. */
OCC_API occ_status occ_segment_breast(const occ_image* img, occ_image** mask, int bbox[4]);
OCC_API occ_status occ_preprocess_view(const occ_image* img, occ_side side, int width, int height,
                                       occ_image** out);
OCC_API occ_status occ_standardize_orientation(const occ_image* img, occ_side side, occ_image** out);
OCC_API occ_status occ_clahe(const occ_image* img, double clip_limit, int tiles_x, int tiles_y,
                             int bins, occ_image** out);

/* Radon transform. Values are stored one angle after another. */
OCC_API occ_status occ_radon(const occ_image* img, int n_theta, occ_sinogram** out);
OCC_API occ_status occ_iradon(const occ_sinogram* sino, int width, int height, int hann_window,
                              occ_image** out);
OCC_API int occ_sinogram_n_t(const occ_sinogram* sino);
OCC_API int occ_sinogram_n_theta(const occ_sinogram* sino);
OCC_API const double* occ_sinogram_values(const occ_sinogram* sino);
OCC_API void occ_sinogram_free(occ_sinogram* sino);

/* Radon cumulative distribution transform of `target` against `templ`. */
OCC_API occ_status occ_rcdt_forward(const occ_image* templ, const occ_image* target, int n_theta,
                                    occ_rcdt** out);
OCC_API int occ_rcdt_n_t(const occ_rcdt* rcdt);
OCC_API int occ_rcdt_n_theta(const occ_rcdt* rcdt);
OCC_API const double* occ_rcdt_values(const occ_rcdt* rcdt);
OCC_API occ_status occ_rcdt_visualize(const occ_rcdt* rcdt, int width, int height, occ_image** out);
OCC_API occ_status occ_rcdt_inverse(const occ_rcdt* rcdt, const occ_image* templ, int width,
                                    int height, occ_image** out);
/* 16-bit PNG of the values plus a <path>.txt grid description. */
OCC_API occ_status occ_rcdt_dump(const occ_rcdt* rcdt, const char* path);
OCC_API void occ_rcdt_free(occ_rcdt* rcdt);

/* Green-magenta fusion: R = b, G = a, B = b. */
OCC_API occ_status occ_fuse(const occ_image* a, const occ_image* b, occ_image** out);

/* Contralateral simulation. `view` names the simulated image, e.g. "right_cc". */
OCC_API occ_status occ_simulate(const occ_image* input, occ_simulator kind, double smoothing_sigma,
                                const char* external_dir, const char* case_id, const char* view,
                                occ_image** out);

/* Phantoms. */
typedef struct occ_phantom_params {
  int size;
  double texture_correlation;
  double lesion_contrast;
  double lesion_radius;
  double lesion_jitter;
  double noise_sigma;
} occ_phantom_params;

OCC_API void occ_phantom_defaults(occ_phantom_params* params);
/* views receives left_cc, right_cc, left_mlo, right_mlo in native
 * orientation. cancer_side is -1 for controls, otherwise an occ_side. */
OCC_API occ_status occ_phantom_case(uint64_t seed, const occ_phantom_params* params, int cancer,
                                    occ_image* views[4], int* cancer_side);
OCC_API occ_status occ_phantom_cohort(uint64_t seed, int n_controls, int n_cancers,
                                      const occ_phantom_params* params, const char* dir);

/* Sliding windows and the logistic baseline. */
OCC_API occ_status occ_window_count(int width, int height, int window, int stride_x, int stride_y,
                                    size_t* count);
/* Writes up to `capacity` features; `written` receives the feature count. */
OCC_API occ_status occ_window_features(const occ_image* window, double* out, size_t capacity,
                                       size_t* written);
/* features is rows x dim, row-major; labels are 0 or 1. */
OCC_API occ_status occ_model_train(const double* features, size_t rows, size_t dim, const int* labels,
                                   double learning_rate, int epochs, double l2, occ_model** out);
OCC_API occ_status occ_model_predict(const occ_model* model, const double* features, size_t dim,
                                     double* score);
OCC_API size_t occ_model_dim(const occ_model* model);
OCC_API double occ_model_final_loss(const occ_model* model);
OCC_API occ_status occ_model_save(const occ_model* model, const char* path);
OCC_API occ_status occ_model_load(const char* path, occ_model** out);
OCC_API void occ_model_free(occ_model* model);
OCC_API occ_status occ_score_case(const double* window_scores, size_t n, double* score);

/* Evaluation. labels: nonzero = positive. */
typedef struct occ_roc {
  double auc;
  double variance;
  double ci_lo;
  double ci_hi;
} occ_roc;

typedef struct occ_comparison {
  double auc_a;
  double auc_b;
  double diff;
  double variance;
  double ci_lo;
  double ci_hi;
  double z;
  double p_value;
} occ_comparison;

OCC_API occ_status occ_roc_auc(const double* scores, const int* labels, size_t n, occ_roc* out);
OCC_API occ_status occ_delong_compare(const double* scores_a, const double* scores_b,
                                      const int* labels, size_t n, occ_comparison* out);
OCC_API occ_status occ_similarity(const occ_image* a, const occ_image* b, double* mse,
                                  double* correlation);
OCC_API occ_status occ_midpoint_threshold(const double* positive, size_t n_positive,
                                          const double* negative, size_t n_negative,
                                          double* threshold);

/* Pipeline configuration. Text outputs follow the snprintf convention:
 * `needed` receives the full length and at most capacity - 1 characters
 * plus a terminator are written. */
OCC_API occ_status occ_config_create(occ_config** out);
OCC_API occ_status occ_config_load(const char* path, occ_config** out);
OCC_API occ_status occ_config_set(occ_config* config, const char* key, const char* value);
OCC_API occ_status occ_config_get(const occ_config* config, const char* key, char* buf,
                                  size_t capacity, size_t* needed);
OCC_API occ_status occ_config_validate(const occ_config* config);
OCC_API occ_status occ_config_format(const occ_config* config, char* buf, size_t capacity,
                                     size_t* needed);
OCC_API void occ_config_free(occ_config* config);
OCC_API size_t occ_config_key_count(void);
OCC_API const char* occ_config_key_name(size_t index);
OCC_API const char* occ_config_key_description(size_t index);

typedef void (*occ_progress_fn)(size_t done, size_t total, void* user);

/* Full experiment into the configured output directory. `report`, when not
 * null, receives the text report. */
OCC_API occ_status occ_run_experiment(const occ_config* config, occ_progress_fn progress, void* user,
                                      char* report, size_t capacity, size_t* needed);

/* Directory stages; see the README for the file layout. */
OCC_API occ_status occ_stage_phantom(const occ_config* config, const char* out_dir);
OCC_API occ_status occ_stage_preprocess(const occ_config* config, const char* in_dir,
                                        const char* out_dir);
OCC_API occ_status occ_stage_simulate(const occ_config* config, const char* in_dir,
                                      const char* out_dir);
OCC_API occ_status occ_stage_rcdt(const occ_config* config, const char* in_dir, const char* out_dir);
OCC_API occ_status occ_stage_fuse(const occ_config* config, const char* in_dir, const char* out_dir);
OCC_API occ_status occ_stage_train(const occ_config* config, const char* in_dir, const char* out_dir);
OCC_API occ_status occ_stage_score(const occ_config* config, const char* in_dir,
                                   const char* model_dir, const char* out_dir);
OCC_API occ_status occ_stage_evaluate(const char* score_table, const char* out_dir, char* report,
                                      size_t capacity, size_t* needed);
OCC_API occ_status occ_stage_compare(const char* score_table, const char* out_dir, char* report,
                                     size_t capacity, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
