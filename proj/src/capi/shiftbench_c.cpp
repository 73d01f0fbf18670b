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
#include "shiftbench/shiftbench.h"

#include <new>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "curation.hpp"
#include "detectors.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "tensor_store.hpp"
#include "version.hpp"

struct sb_bundle {
  shiftbench::DatasetBundle value;
};

struct sb_detector {
  shiftbench::FittedDetector value;
};

struct sb_hierarchy {
  shiftbench::Hierarchy value;
};

struct sb_curation {
  shiftbench::CurationResult value;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

sb_status set_error(sb_status code, std::string message) {
  g_last_error = std::move(message);
  return code;
}

// Runs fn and converts exceptions into status codes.
template <typename Fn>
sb_status guard(Fn&& fn) noexcept {
  try {
    g_last_error.clear();
    fn();
    return SB_OK;
  } catch (const shiftbench::Error& e) {
    return set_error(static_cast<sb_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SB_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) shiftbench::fail(shiftbench::ErrorCode::kInvalidArgument, what);
}

shiftbench::Matrix copy_matrix(const float* data, size_t rows, size_t cols, const char* tag) {
  require(data != nullptr || rows * cols == 0, "matrix data is NULL");
  std::vector<float> values(data, data + rows * cols);
  return shiftbench::Matrix(rows, cols, std::move(values), tag);
}

void fill_auroc(const shiftbench::AurocResult& r, sb_auroc_result* out) {
  out->auroc = r.auroc;
  out->tie_mass = r.tie_mass;
  out->n_id = r.n_id;
  out->n_ood = r.n_ood;
}

shiftbench::RegressionFit to_fit(const sb_regression& r) {
  shiftbench::RegressionFit f;
  f.degenerate = r.degenerate != 0;
  f.beta = r.beta;
  f.alpha = r.alpha;
  f.se_beta = r.se_beta;
  f.se_alpha = r.se_alpha;
  f.n = r.n;
  return f;
}

}  // namespace

extern "C" {

const char* sb_version(void) { return shiftbench::kVersion; }

const char* sb_last_error(void) { return g_last_error.c_str(); }

sb_status sb_bundle_create(const char* name, const char* role, sb_bundle** out) {
  return guard([&] {
    require(out != nullptr && role != nullptr, "NULL argument");
    auto r = shiftbench::parse_role(role);
    if (!r) shiftbench::fail(shiftbench::ErrorCode::kManifest, std::string("unknown role '") + role + "'");
    auto* b = new sb_bundle;
    b->value.name = name ? name : "";
    b->value.role = *r;
    *out = b;
  });
}

sb_status sb_bundle_load(const char* manifest_path, sb_bundle** out) {
  return guard([&] {
    require(out != nullptr && manifest_path != nullptr, "NULL argument");
    auto bundle = shiftbench::load_bundle(manifest_path);
    *out = new sb_bundle{std::move(bundle)};
  });
}

sb_status sb_bundle_save(const sb_bundle* bundle, const char* manifest_path) {
  return guard([&] {
    require(bundle != nullptr && manifest_path != nullptr, "NULL argument");
    shiftbench::save_bundle(bundle->value, manifest_path);
  });
}

void sb_bundle_free(sb_bundle* bundle) { delete bundle; }

sb_status sb_bundle_set_features(sb_bundle* bundle, const float* data, size_t rows, size_t cols) {
  return guard([&] {
    require(bundle != nullptr, "NULL bundle");
    bundle->value.features = shiftbench::FeatureMatrix(copy_matrix(data, rows, cols, "capi_features"));
  });
}

sb_status sb_bundle_set_logits(sb_bundle* bundle, const float* data, size_t rows, size_t cols) {
  return guard([&] {
    require(bundle != nullptr, "NULL bundle");
    bundle->value.logits = shiftbench::LogitMatrix(copy_matrix(data, rows, cols, "capi_logits"));
  });
}

sb_status sb_bundle_set_labels(sb_bundle* bundle, const int32_t* labels, size_t n) {
  return guard([&] {
    require(bundle != nullptr, "NULL bundle");
    require(labels != nullptr || n == 0, "labels are NULL");
    bundle->value.labels = shiftbench::LabelVector(std::vector<std::int32_t>(labels, labels + n));
  });
}

sb_status sb_bundle_set_head(sb_bundle* bundle, const float* weights, const float* bias,
                             size_t classes, size_t dim) {
  return guard([&] {
    require(bundle != nullptr, "NULL bundle");
    require(bias != nullptr || classes == 0, "bias is NULL");
    shiftbench::LinearHead head;
    head.weights = copy_matrix(weights, classes, dim, "capi_head");
    head.bias.assign(bias, bias + classes);
    head.validate();
    bundle->value.head = std::move(head);
  });
}

sb_status sb_bundle_validate(const sb_bundle* bundle) {
  return guard([&] {
    require(bundle != nullptr, "NULL bundle");
    bundle->value.validate();
  });
}

size_t sb_bundle_rows(const sb_bundle* bundle) { return bundle ? bundle->value.rows() : 0; }

sb_status sb_detector_fit(const char* spec, const sb_bundle* train, sb_detector** out) {
  return guard([&] {
    require(spec != nullptr && train != nullptr && out != nullptr, "NULL argument");
    auto config = shiftbench::parse_detector_spec(spec);
    *out = new sb_detector{shiftbench::fit(config, train->value)};
  });
}

sb_status sb_detector_load(const char* dir, sb_detector** out) {
  return guard([&] {
    require(dir != nullptr && out != nullptr, "NULL argument");
    *out = new sb_detector{shiftbench::load_detector(dir)};
  });
}

sb_status sb_detector_save(const sb_detector* detector, const char* dir) {
  return guard([&] {
    require(detector != nullptr && dir != nullptr, "NULL argument");
    shiftbench::save_detector(detector->value, dir);
  });
}

void sb_detector_free(sb_detector* detector) { delete detector; }

const char* sb_detector_kind(const sb_detector* detector) {
  return detector ? shiftbench::kind_name(detector->value.kind()) : "";
}

sb_status sb_detector_score(const sb_detector* detector, const sb_bundle* bundle, double* out,
                            size_t capacity) {
  return guard([&] {
    require(detector != nullptr && bundle != nullptr, "NULL argument");
    auto scores = detector->value.score(bundle->value);
    if (capacity < scores.size())
      shiftbench::fail(shiftbench::ErrorCode::kShape,
                       "output buffer holds " + std::to_string(capacity) + " scores, " +
                           std::to_string(scores.size()) + " needed");
    require(out != nullptr || scores.size() == 0, "output buffer is NULL");
    std::copy(scores.values.begin(), scores.values.end(), out);
  });
}

sb_status sb_auroc(const double* id_scores, size_t n_id, const double* ood_scores, size_t n_ood,
                   sb_auroc_result* out) {
  return guard([&] {
    require(out != nullptr, "NULL result");
    require((id_scores || n_id == 0) && (ood_scores || n_ood == 0), "NULL scores");
    fill_auroc(shiftbench::auroc({id_scores, n_id}, {ood_scores, n_ood}), out);
  });
}

sb_status sb_frame_auroc(int goal, const sb_bundle* id_side, const double* id_scores,
                         const sb_bundle* shift, const double* shift_scores, sb_auroc_result* out) {
  return guard([&] {
    require(id_side && id_scores && shift && shift_scores && out, "NULL argument");
    if (goal != SB_GOAL_NEW_CLASS && goal != SB_GOAL_FAILURE)
      shiftbench::fail(shiftbench::ErrorCode::kInvalidArgument, "unknown goal");
    shiftbench::ScoreVector a{shiftbench::DetectorKind::kMsp,
                              {id_scores, id_scores + id_side->value.rows()}};
    shiftbench::ScoreVector b{shiftbench::DetectorKind::kMsp,
                              {shift_scores, shift_scores + shift->value.rows()}};
    shiftbench::ScoredBundle shifted{&shift->value, &b};
    auto frame = shiftbench::build_frame(
        goal == SB_GOAL_FAILURE ? shiftbench::Goal::kFailure : shiftbench::Goal::kNewClass,
        shiftbench::ScoredBundle{&id_side->value, &a}, std::span<const shiftbench::ScoredBundle>(&shifted, 1));
    fill_auroc(shiftbench::frame_auroc(frame), out);
  });
}

sb_status sb_decompose(const double* id_scores, const unsigned char* correct, size_t n_id,
                       const double* ood_scores, size_t n_ood, sb_decomposition* out) {
  return guard([&] {
    require(out != nullptr, "NULL result");
    require((id_scores && correct) || n_id == 0, "NULL ID scores");
    require(ood_scores || n_ood == 0, "NULL OOD scores");
    std::vector<bool> mask(n_id);
    for (size_t i = 0; i < n_id; ++i) mask[i] = correct[i] != 0;
    auto d = shiftbench::decompose({id_scores, n_id}, mask, {ood_scores, n_ood});
    *out = sb_decomposition{};
    out->auroc_total = d.auroc_total;
    out->has_correct = d.auroc_correct.has_value();
    out->has_incorrect = d.auroc_incorrect.has_value();
    out->has_correct_vs_incorrect = d.auroc_correct_vs_incorrect.has_value();
    out->auroc_correct = d.auroc_correct.value_or(0.0);
    out->auroc_incorrect = d.auroc_incorrect.value_or(0.0);
    out->auroc_correct_vs_incorrect = d.auroc_correct_vs_incorrect.value_or(0.0);
    out->accuracy = d.accuracy;
    out->n_correct = d.n_correct;
    out->n_incorrect = d.n_incorrect;
    out->n_ood = d.n_ood;
  });
}

sb_status sb_quantile(const double* values, size_t n, double q, double* out) {
  return guard([&] {
    require(out != nullptr && (values != nullptr || n == 0), "NULL argument");
    *out = shiftbench::quantile({values, n}, q);
  });
}

sb_status sb_ols_fit(const double* x, const double* y, size_t n, sb_regression* out) {
  return guard([&] {
    require(out != nullptr && ((x && y) || n == 0), "NULL argument");
    auto f = shiftbench::ols_fit({x, n}, {y, n});
    *out = sb_regression{f.degenerate ? 1 : 0, f.beta, f.alpha, f.se_beta, f.se_alpha, f.n};
  });
}

sb_status sb_intercept_ci_overlap(const sb_regression* a, const sb_regression* b,
                                  double multiplier, int* overlap) {
  return guard([&] {
    require(a && b && overlap, "NULL argument");
    *overlap = shiftbench::intercept_ci_overlap(to_fit(*a), to_fit(*b), multiplier).overlap ? 1 : 0;
  });
}

sb_status sb_hierarchy_parse(const char* edges_tsv, const char* names_tsv, sb_hierarchy** out) {
  return guard([&] {
    require(edges_tsv != nullptr && out != nullptr, "NULL argument");
    std::optional<std::string_view> names;
    if (names_tsv) names = names_tsv;
    *out = new sb_hierarchy{shiftbench::Hierarchy::parse(edges_tsv, names)};
  });
}

sb_status sb_hierarchy_load(const char* edges_path, const char* names_path, sb_hierarchy** out) {
  return guard([&] {
    require(edges_path != nullptr && out != nullptr, "NULL argument");
    std::optional<std::filesystem::path> names;
    if (names_path) names = names_path;
    *out = new sb_hierarchy{shiftbench::Hierarchy::load(edges_path, names)};
  });
}

void sb_hierarchy_free(sb_hierarchy* hierarchy) { delete hierarchy; }

size_t sb_hierarchy_size(const sb_hierarchy* hierarchy) {
  return hierarchy ? hierarchy->value.size() : 0;
}

sb_status sb_curate(const sb_hierarchy* hierarchy, const char* const* id_classes, size_t n_id,
                    const char* organism_root, int restrict_to_sisters, sb_curation** out) {
  return guard([&] {
    require(hierarchy != nullptr && out != nullptr, "NULL argument");
    require(id_classes != nullptr || n_id == 0, "NULL ID class list");
    shiftbench::ClassSet ids;
    for (size_t i = 0; i < n_id; ++i) {
      require(id_classes[i] != nullptr, "NULL ID class");
      ids.emplace_back(id_classes[i]);
    }
    shiftbench::CurationOptions options;
    if (organism_root) options.organism_root = organism_root;
    options.restrict_to_sisters = restrict_to_sisters != 0;
    auto result = shiftbench::curate(hierarchy->value, ids, options);
    auto* c = new sb_curation{std::move(result), {}};
    c->csv = shiftbench::audit_csv(c->value);
    *out = c;
  });
}

void sb_curation_free(sb_curation* curation) { delete curation; }

size_t sb_curation_final_count(const sb_curation* curation) {
  return curation ? curation->value.final_classes.size() : 0;
}

const char* sb_curation_final_id(const sb_curation* curation, size_t i) {
  if (!curation || i >= curation->value.final_classes.size()) return nullptr;
  return curation->value.final_classes[i].c_str();
}

const char* sb_curation_audit_csv(const sb_curation* curation) {
  return curation ? curation->csv.c_str() : "";
}

}  // extern "C"
