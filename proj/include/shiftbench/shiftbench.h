/* Copyright 2026 The ShiftBench Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SHIFTBENCH_SHIFTBENCH_H_
#define SHIFTBENCH_SHIFTBENCH_H_

/* C interface to the shiftbench shared library.
 *
 * Every function that can fail returns an sb_status. On failure the message
 * is available from sb_last_error() on the same thread until the next call.
 * Handles are opaque and must be released with the matching *_free function;
 * passing NULL to a *_free function is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SB_API __declspec(dllexport)
#else
#define SB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int sb_status;

#define SB_OK 0
#define SB_ERR_INVALID_ARGUMENT 1
#define SB_ERR_IO 2
#define SB_ERR_FORMAT 3
#define SB_ERR_VALIDATION 4
#define SB_ERR_MANIFEST 5
#define SB_ERR_CONSISTENCY 6
#define SB_ERR_SHAPE 7
#define SB_ERR_CONFIG 8
#define SB_ERR_NUMERICAL 9
#define SB_ERR_UNDEFINED_METRIC 10
#define SB_ERR_CONTAMINATION 11
#define SB_ERR_HIERARCHY 12
#define SB_ERR_MISSING_INPUT 13
#define SB_ERR_INTERNAL 14

#define SB_GOAL_NEW_CLASS 0
#define SB_GOAL_FAILURE 1

typedef struct sb_bundle sb_bundle;
typedef struct sb_detector sb_detector;
typedef struct sb_hierarchy sb_hierarchy;
typedef struct sb_curation sb_curation;

SB_API const char* sb_version(void);
SB_API const char* sb_last_error(void);

/* ---- bundles ---------------------------------------------------------- */

/* role: train_id, test_id, covariate_shift, semantic_shift or
 * reference_embedding. */
SB_API sb_status sb_bundle_create(const char* name, const char* role, sb_bundle** out);
SB_API sb_status sb_bundle_load(const char* manifest_path, sb_bundle** out);
SB_API sb_status sb_bundle_save(const sb_bundle* bundle, const char* manifest_path);
SB_API void sb_bundle_free(sb_bundle* bundle);

/* Row-major float32 copies; the caller keeps ownership of the input. */
SB_API sb_status sb_bundle_set_features(sb_bundle* bundle, const float* data, size_t rows,
                                        size_t cols);
SB_API sb_status sb_bundle_set_logits(sb_bundle* bundle, const float* data, size_t rows,
                                      size_t cols);
SB_API sb_status sb_bundle_set_labels(sb_bundle* bundle, const int32_t* labels, size_t n);
SB_API sb_status sb_bundle_set_head(sb_bundle* bundle, const float* weights, const float* bias,
                                    size_t classes, size_t dim);
SB_API sb_status sb_bundle_validate(const sb_bundle* bundle);
SB_API size_t sb_bundle_rows(const sb_bundle* bundle);

/* ---- detectors -------------------------------------------------------- */

/* spec: "kind" or "kind:key=value,...", e.g. "knn:k=50" or
 * "odin_temp:temperature=1000". */
SB_API sb_status sb_detector_fit(const char* spec, const sb_bundle* train, sb_detector** out);
SB_API sb_status sb_detector_load(const char* dir, sb_detector** out);
SB_API sb_status sb_detector_save(const sb_detector* detector, const char* dir);
SB_API void sb_detector_free(sb_detector* detector);
SB_API const char* sb_detector_kind(const sb_detector* detector);

/* Writes sb_bundle_rows(bundle) scores; capacity must be at least that. */
SB_API sb_status sb_detector_score(const sb_detector* detector, const sb_bundle* bundle,
                                   double* out, size_t capacity);

/* ---- evaluation ------------------------------------------------------- */

typedef struct sb_auroc_result {
  double auroc;
  double tie_mass;
  size_t n_id;
  size_t n_ood;
} sb_auroc_result;

SB_API sb_status sb_auroc(const double* id_scores, size_t n_id, const double* ood_scores,
                          size_t n_ood, sb_auroc_result* out);

/* Pools id_side (any ID role) against shift (semantic_shift) under the goal. */
SB_API sb_status sb_frame_auroc(int goal, const sb_bundle* id_side, const double* id_scores,
                                const sb_bundle* shift, const double* shift_scores,
                                sb_auroc_result* out);

typedef struct sb_decomposition {
  double auroc_total;
  double auroc_correct; /* valid when has_correct */
  double auroc_incorrect;
  double auroc_correct_vs_incorrect;
  int has_correct;
  int has_incorrect;
  int has_correct_vs_incorrect;
  double accuracy;
  size_t n_correct;
  size_t n_incorrect;
  size_t n_ood;
} sb_decomposition;

/* correct[i] != 0 marks id_scores[i] as correctly classified. */
SB_API sb_status sb_decompose(const double* id_scores, const unsigned char* correct, size_t n_id,
                              const double* ood_scores, size_t n_ood, sb_decomposition* out);

SB_API sb_status sb_quantile(const double* values, size_t n, double q, double* out);

/* ---- analysis --------------------------------------------------------- */

typedef struct sb_regression {
  int degenerate;
  double beta;
  double alpha;
  double se_beta;
  double se_alpha;
  size_t n;
} sb_regression;

SB_API sb_status sb_ols_fit(const double* x, const double* y, size_t n, sb_regression* out);

/* Sets *overlap to 1 when the closed intervals alpha +/- multiplier * se
 * intersect. */
SB_API sb_status sb_intercept_ci_overlap(const sb_regression* a, const sb_regression* b,
                                         double multiplier, int* overlap);

/* ---- curation --------------------------------------------------------- */

/* names_tsv may be NULL. */
SB_API sb_status sb_hierarchy_parse(const char* edges_tsv, const char* names_tsv,
                                    sb_hierarchy** out);
SB_API sb_status sb_hierarchy_load(const char* edges_path, const char* names_path,
                                   sb_hierarchy** out);
SB_API void sb_hierarchy_free(sb_hierarchy* hierarchy);
SB_API size_t sb_hierarchy_size(const sb_hierarchy* hierarchy);

/* organism_root may be NULL to skip that stage. */
SB_API sb_status sb_curate(const sb_hierarchy* hierarchy, const char* const* id_classes,
                           size_t n_id, const char* organism_root, int restrict_to_sisters,
                           sb_curation** out);
SB_API void sb_curation_free(sb_curation* curation);
SB_API size_t sb_curation_final_count(const sb_curation* curation);
SB_API const char* sb_curation_final_id(const sb_curation* curation, size_t i);
/* Audit CSV owned by the handle. */
SB_API const char* sb_curation_audit_csv(const sb_curation* curation);

#ifdef __cplusplus
}
#endif

#endif /* SHIFTBENCH_SHIFTBENCH_H_ */
