/*
 * Copyright 2026 The grafiq Authors
 * SPDX-License-Identifier: Apache-2.0
 */

/* C interface to the grafiq face-image quality engine.
 *
 * All objects are opaque handles created and released through this API.
 * Every fallible call returns a grafiq_status; on failure a message for the
 * calling thread is available from grafiq_last_error() until the next
 * failing call on that thread. Handles are immutable after creation unless a
 * function says otherwise and may be shared between threads. */

#ifndef GRAFIQ_H
#define GRAFIQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(GRAFIQ_BUILDING_LIBRARY)
#define GRAFIQ_API __attribute__((visibility("default")))
#else
#define GRAFIQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum grafiq_status {
  GRAFIQ_OK = 0,
  GRAFIQ_ERROR_DIMENSION = 1,
  GRAFIQ_ERROR_SPEC = 2,
  GRAFIQ_ERROR_CORRUPT_MODEL = 3,
  GRAFIQ_ERROR_BAD_MAGIC = 4,
  GRAFIQ_ERROR_TRUNCATED = 5,
  GRAFIQ_ERROR_CHECKSUM = 6,
  GRAFIQ_ERROR_MALFORMED_HEADER = 7,
  GRAFIQ_ERROR_SHAPE_MISMATCH = 8,
  GRAFIQ_ERROR_NON_FINITE_STATS = 9,
  GRAFIQ_ERROR_NUMERIC_OVERFLOW = 10,
  GRAFIQ_ERROR_CONSISTENCY = 11,
  GRAFIQ_ERROR_USAGE = 12,
  GRAFIQ_ERROR_DECODE = 13,
  GRAFIQ_ERROR_IO = 14,
  GRAFIQ_ERROR_DEGENERATE_EMBEDDING = 15,
  GRAFIQ_ERROR_INTERNAL = 100
} grafiq_status;

typedef enum grafiq_tap {
  GRAFIQ_TAP_IMAGE = 0,
  GRAFIQ_TAP_B1 = 1,
  GRAFIQ_TAP_B2 = 2,
  GRAFIQ_TAP_B3 = 3,
  GRAFIQ_TAP_B4 = 4
} grafiq_tap;

#define GRAFIQ_TAP_COUNT 5
#define GRAFIQ_TAP_BIT(tap) (1u << (unsigned)(tap))
#define GRAFIQ_ALL_TAPS 0x1fu

typedef enum grafiq_precision { GRAFIQ_F32 = 0, GRAFIQ_F64 = 1 } grafiq_precision;

typedef enum grafiq_method {
  GRAFIQ_METHOD_GRADIENT = 0, /* summed |gradient| at a tap */
  GRAFIQ_METHOD_MSE_BNS = 1   /* BN-statistics loss only, no backward pass */
} grafiq_method;

typedef struct grafiq_network grafiq_network;
typedef struct grafiq_embeddings grafiq_embeddings;
typedef struct grafiq_edc_curve grafiq_edc_curve;

GRAFIQ_API const char* grafiq_version(void);
GRAFIQ_API const char* grafiq_status_name(grafiq_status status);
GRAFIQ_API const char* grafiq_last_error(void);
GRAFIQ_API void grafiq_string_free(char* s);

/* ---- networks ---------------------------------------------------------- */

GRAFIQ_API grafiq_status grafiq_network_load(const char* path, grafiq_network** out);

/* spec_json uses the same schema as the "spec" object of a GRFQ1 header.
 * random_init = 0 gives zero weights; otherwise weights are drawn from
 * `seed`. Running statistics start at mean 0, std 1. */
GRAFIQ_API grafiq_status grafiq_network_build(const char* spec_json, int random_init, uint64_t seed,
                                              grafiq_network** out);
GRAFIQ_API grafiq_status grafiq_network_save(const grafiq_network* net, const char* path);
GRAFIQ_API void grafiq_network_free(grafiq_network* net);

typedef struct grafiq_network_info {
  size_t input_height;
  size_t input_width;
  size_t embedding_dim;
  size_t bn_layers;
  size_t parameter_count;
} grafiq_network_info;

GRAFIQ_API grafiq_status grafiq_network_get_info(const grafiq_network* net, grafiq_network_info* out);

/* *out must be released with grafiq_string_free. */
GRAFIQ_API grafiq_status grafiq_network_spec_json(const grafiq_network* net, char** out);

/* Replaces the running statistics with the statistics pooled over all
 * listed images and positions. Mutates `net`; do not share it with
 * concurrent scorers during the call. */
GRAFIQ_API grafiq_status grafiq_network_calibrate(grafiq_network* net, const char* const* image_paths,
                                                  size_t count);

/* ---- scoring ----------------------------------------------------------- */

typedef struct grafiq_score_options {
  unsigned tap_mask;       /* GRAFIQ_TAP_BIT(...) flags; selected_tap is always added */
  grafiq_tap selected_tap; /* default GRAFIQ_TAP_B2 */
  grafiq_precision precision;
  grafiq_method method;
  size_t jobs;      /* images scored concurrently, >= 1 */
  int observe_head; /* include the embedding-head BN layers in the loss */
} grafiq_score_options;

GRAFIQ_API void grafiq_score_options_init(grafiq_score_options* options);

#define GRAFIQ_MESSAGE_SIZE 256

typedef struct grafiq_quality_report {
  grafiq_status status; /* per-image outcome */
  double loss_bns;
  double raw_magnitude[GRAFIQ_TAP_COUNT]; /* sum |dL/d tap|; NaN when not computed */
  double quality[GRAFIQ_TAP_COUNT];       /* -raw_magnitude */
  double selected_quality;
  size_t forward_passes;
  size_t backward_passes;
  char error[GRAFIQ_MESSAGE_SIZE];
} grafiq_quality_report;

/* Scores `count` images (P6 PPM or GRIM1) into reports[0..count). Per-image
 * failures are reported in reports[i].status and do not stop the batch; the
 * return value only signals invalid arguments. Results do not depend on
 * options->jobs. */
GRAFIQ_API grafiq_status grafiq_score_files(const grafiq_network* net, const char* const* paths, size_t count,
                                            const grafiq_score_options* options, grafiq_quality_report* reports);

/* Scores an already preprocessed [3,H,W] channel-first tensor. */
GRAFIQ_API grafiq_status grafiq_score_tensor(const grafiq_network* net, const float* chw, size_t length,
                                             const grafiq_score_options* options, grafiq_quality_report* report);

/* ---- embeddings ---------------------------------------------------------- */

typedef struct grafiq_item_result {
  grafiq_status status;
  char error[GRAFIQ_MESSAGE_SIZE];
} grafiq_item_result;

/* Writes count * embedding_dim floats into `out`, row i for paths[i]. */
GRAFIQ_API grafiq_status grafiq_embed_files(const grafiq_network* net, const char* const* paths, size_t count,
                                            grafiq_precision precision, size_t jobs, float* out,
                                            grafiq_item_result* results);

GRAFIQ_API grafiq_status grafiq_embeddings_create(size_t dim, grafiq_embeddings** out);
GRAFIQ_API grafiq_status grafiq_embeddings_add(grafiq_embeddings* set, const char* id, const float* values);
GRAFIQ_API grafiq_status grafiq_embeddings_save(const grafiq_embeddings* set, const char* path);
GRAFIQ_API grafiq_status grafiq_embeddings_load(const char* path, grafiq_embeddings** out);
GRAFIQ_API size_t grafiq_embeddings_count(const grafiq_embeddings* set);
GRAFIQ_API size_t grafiq_embeddings_dim(const grafiq_embeddings* set);
/* NULL when absent. */
GRAFIQ_API const float* grafiq_embeddings_find(const grafiq_embeddings* set, const char* id);
GRAFIQ_API void grafiq_embeddings_free(grafiq_embeddings* set);

GRAFIQ_API grafiq_status grafiq_cosine_similarity(const float* a, const float* b, size_t dim, double* out);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct grafiq_comparison {
  double similarity;
  int genuine; /* 1 genuine, 0 impostor */
  double pair_quality;
} grafiq_comparison;

#define GRAFIQ_EDC_INSUFFICIENT_IMPOSTORS 0x1u
#define GRAFIQ_EDC_EMPTY_GENUINE 0x2u

GRAFIQ_API grafiq_status grafiq_edc_compute(const grafiq_comparison* records, size_t count, double fmr_target,
                                            double max_discard, double step, grafiq_edc_curve** out);
GRAFIQ_API double grafiq_edc_threshold(const grafiq_edc_curve* curve);
GRAFIQ_API double grafiq_edc_auc(const grafiq_edc_curve* curve);
GRAFIQ_API double grafiq_edc_fmr_target(const grafiq_edc_curve* curve);
GRAFIQ_API unsigned grafiq_edc_flags(const grafiq_edc_curve* curve);
GRAFIQ_API size_t grafiq_edc_point_count(const grafiq_edc_curve* curve);
GRAFIQ_API grafiq_status grafiq_edc_point(const grafiq_edc_curve* curve, size_t index, double* discard_fraction,
                                          double* fnmr);
GRAFIQ_API void grafiq_edc_free(grafiq_edc_curve* curve);

typedef struct grafiq_auc_entry {
  const char* method;
  const char* benchmark;
  double fmr;
  double auc;
} grafiq_auc_entry;

/* CSV "method,fmr,<benchmarks...>,mean"; *out_csv is released with
 * grafiq_string_free. */
GRAFIQ_API grafiq_status grafiq_auc_table_csv(const grafiq_auc_entry* entries, size_t count, char** out_csv);

/* ---- self check ---------------------------------------------------------- */

typedef struct grafiq_check_result {
  char name[64];
  double max_error;
  double tolerance;
  int passed;
} grafiq_check_result;

/* Gradient checks against central differences plus the zero-loss
 * construction. Writes up to `capacity` results; *count receives the total.
 * corrupt_kernel may be NULL. */
GRAFIQ_API grafiq_status grafiq_selfcheck(uint64_t seed, grafiq_precision precision, size_t networks,
                                          const char* corrupt_kernel, grafiq_check_result* results,
                                          size_t capacity, size_t* count, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* GRAFIQ_H */
