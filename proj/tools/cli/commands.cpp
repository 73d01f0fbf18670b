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
#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "analysis.hpp"
#include "artifacts.hpp"
#include "curation.hpp"
#include "detectors.hpp"
#include "evaluation.hpp"
#include "npy.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sanity.hpp"
#include "tensor_store.hpp"

namespace shiftbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return 2;
    case ErrorCode::kNumerical:
    case ErrorCode::kUndefinedMetric:
      return 4;
    case ErrorCode::kInternal:
      return 1;
    default:
      return 3;
  }
}

namespace {

void require_path(const std::string& path, const std::string& what) {
  if (path.empty()) fail(ErrorCode::kConfig, what + " is not configured");
  std::error_code ec;
  if (!fs::exists(path, ec)) fail(ErrorCode::kConfig, what + " not found: " + path);
}

void require_paths(const std::vector<std::string>& paths, const std::string& what) {
  if (paths.empty()) fail(ErrorCode::kConfig, "no " + what + " configured");
  for (const auto& p : paths) require_path(p, what);
}

void require_detectors(const RunConfig& rc) {
  if (rc.detectors.empty()) fail(ErrorCode::kConfig, "no detectors configured");
  std::set<std::string> labels;
  for (const auto& d : rc.detectors)
    if (!labels.insert(d.label()).second)
      fail(ErrorCode::kConfig, "duplicate detector name '" + d.label() + "'");
}

// Names double as file name components.
std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

DatasetBundle load_input(const std::string& path, OutputDir& out) {
  DatasetBundle b = load_bundle(path);
  out.add_input(path);
  return b;
}

std::vector<DatasetBundle> load_inputs(const std::vector<std::string>& paths, OutputDir& out) {
  std::vector<DatasetBundle> v;
  for (const auto& p : paths) v.push_back(load_input(p, out));
  return v;
}

void require_unique_names(const std::vector<const DatasetBundle*>& bundles) {
  std::set<std::string> names;
  for (const auto* b : bundles)
    if (!names.insert(b->name).second)
      fail(ErrorCode::kConfig, "two datasets share the name '" + b->name + "'");
}

[[noreturn]] void rethrow_cell(const ScoreCell& cell) {
  fail(cell.error_code.value_or(ErrorCode::kInternal),
       "detector '" + cell.detector + "' on '" + cell.dataset + "': " + cell.error);
}

// Fits on train and scores every dataset; the first failed cell (in table
// order) aborts the command.
class Scores {
 public:
  Scores(const RunConfig& rc, const DatasetBundle& train, const std::vector<DatasetBundle>& datasets)
      : table_(score_all(rc.detectors, train, datasets, rc.jobs)) {
    for (const auto& cell : table_.cells)
      if (!cell.scores) rethrow_cell(cell);
  }

  const ScoreVector& get(const std::string& detector, const std::string& dataset) const {
    const ScoreCell* cell = table_.find(detector, dataset);
    if (!cell || !cell->scores)
      fail(ErrorCode::kInternal, "missing score cell " + detector + "/" + dataset);
    return *cell->scores;
  }

 private:
  ScoreTable table_;
};

bool labels_permit_failure(const DatasetBundle& b) {
  if (!b.labels || !b.logits) return false;
  auto v = b.labels->values();
  return std::none_of(v.begin(), v.end(), [](std::int32_t l) { return l == kNoLabel; });
}

void require_labels(const DatasetBundle& b, const std::string& purpose) {
  if (!labels_permit_failure(b))
    fail(ErrorCode::kMissingInput, "labels required: " + purpose + " needs labels and logits on '" +
                                       b.name + "'");
}

std::vector<bool> correct_mask(const DatasetBundle& b) {
  auto pred = predictions(*b.logits);
  std::vector<bool> mask(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) mask[i] = pred[i] == (*b.labels)[i];
  return mask;
}

json decomposition_json(const Decomposition& d) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"auroc_total", d.auroc_total},
          {"auroc_correct", opt(d.auroc_correct)},
          {"auroc_incorrect", opt(d.auroc_incorrect)},
          {"auroc_correct_vs_incorrect", opt(d.auroc_correct_vs_incorrect)},
          {"accuracy", d.accuracy},
          {"n_correct", d.n_correct},
          {"n_incorrect", d.n_incorrect},
          {"n_ood", d.n_ood}};
}

struct GridInputs {
  DatasetBundle train;
  std::vector<DatasetBundle> id_sets;
  std::vector<DatasetBundle> ood_sets;
};

GridInputs load_grid(const RunConfig& rc, OutputDir& out) {
  require_detectors(rc);
  require_path(rc.train, "train manifest");
  require_paths(rc.id_sets, "ID-side manifests");
  require_paths(rc.ood_sets, "semantic-shift manifests");
  GridInputs g;
  g.train = load_input(rc.train, out);
  g.id_sets = load_inputs(rc.id_sets, out);
  g.ood_sets = load_inputs(rc.ood_sets, out);
  std::vector<const DatasetBundle*> all;
  for (const auto& b : g.id_sets) all.push_back(&b);
  for (const auto& b : g.ood_sets) all.push_back(&b);
  require_unique_names(all);
  return g;
}

std::vector<DatasetBundle> concat(const std::vector<DatasetBundle>& a, const std::vector<DatasetBundle>& b) {
  std::vector<DatasetBundle> v = a;
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

std::vector<double> pooled_correct(const DatasetBundle& b, const ScoreVector& s) {
  auto mask = correct_mask(b);
  std::vector<double> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(s.values[i]);
  return out;
}

std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t");
    ids.push_back(line.substr(b, e - b + 1));
  }
  return ids;
}

}  // namespace

void cmd_fit(const RunConfig& rc) {
  require_detectors(rc);
  require_path(rc.train, "train manifest");
  OutputDir out(rc, "fit");
  DatasetBundle train = load_input(rc.train, out);
  std::vector<std::optional<FittedDetector>> fitted(rc.detectors.size());
  std::vector<std::optional<Error>> errors(rc.detectors.size());
  parallel_for(rc.detectors.size(), rc.jobs, [&](std::size_t i) {
    try {
      fitted[i].emplace(fit(rc.detectors[i], train));
    } catch (const Error& e) {
      errors[i].emplace(e.code(), "detector '" + rc.detectors[i].label() + "': " + e.what());
    }
  });
  for (const auto& e : errors)
    if (e) throw *e;
  json list = json::array();
  for (const auto& f : fitted) {
    const std::string label = f->config().label();
    out.write_detector("detectors/" + file_token(label), *f);
    list.push_back({{"name", label}, {"spec", detector_spec(f->config())}, {"dir", "detectors/" + file_token(label)}});
  }
  out.finish({{"detectors", list}});
}

void cmd_score(const RunConfig& rc) {
  std::vector<std::string> paths = rc.id_sets;
  paths.insert(paths.end(), rc.ood_sets.begin(), rc.ood_sets.end());
  require_paths(paths, "dataset manifests");
  const fs::path dir = rc.detectors_dir.empty() ? fs::path(rc.out) / "detectors" : fs::path(rc.detectors_dir);
  std::vector<std::string> labels;
  if (!rc.detectors.empty()) {
    for (const auto& d : rc.detectors) labels.push_back(file_token(d.label()));
  } else {
    std::error_code ec;
    if (fs::is_directory(dir, ec))
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && entry.path().extension() != ".partial")
          labels.push_back(entry.path().filename().string());
    std::sort(labels.begin(), labels.end());
  }
  if (labels.empty()) fail(ErrorCode::kConfig, "no fitted detectors found under " + dir.string());
  for (const auto& l : labels) require_path((dir / l).string(), "fitted detector");

  OutputDir out(rc, "score");
  std::vector<FittedDetector> detectors;
  for (const auto& l : labels) {
    out.add_input(dir / l / "descriptor.json");
    detectors.push_back(load_detector(dir / l));
  }
  std::vector<DatasetBundle> data = load_inputs(paths, out);
  std::vector<const DatasetBundle*> ptrs;
  for (const auto& b : data) ptrs.push_back(&b);
  require_unique_names(ptrs);

  const std::size_t nd = data.size();
  std::vector<std::optional<ScoreVector>> cells(detectors.size() * nd);
  std::vector<std::optional<Error>> errors(cells.size());
  parallel_for(cells.size(), rc.jobs, [&](std::size_t idx) {
    const auto& det = detectors[idx / nd];
    const auto& ds = data[idx % nd];
    try {
      cells[idx].emplace(det.score(ds));
    } catch (const Error& e) {
      errors[idx].emplace(e.code(), "detector '" + det.config().label() + "' on '" + ds.name + "': " + e.what());
    }
  });
  for (const auto& e : errors)
    if (e) throw *e;

  std::string index = "detector,dataset,file,n\n";
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    const std::string det = detectors[idx / nd].config().label();
    const std::string ds = data[idx % nd].name;
    const std::string rel = "scores/" + file_token(det) + "__" + file_token(ds) + ".npy";
    const auto& v = cells[idx]->values;
    out.write_npy(rel, npy::from_f64({v.size()}, v));
    index += csv_field(det) + "," + csv_field(ds) + "," + rel + "," + std::to_string(v.size()) + "\n";
  }
  out.write_csv("scores/index.csv", index);
  out.finish();
}

void cmd_eval(const RunConfig& rc) {
  OutputDir out(rc, "eval");
  GridInputs g = load_grid(rc, out);

  std::vector<Goal> goals;
  if (rc.goals) {
    goals = *rc.goals;
    if (std::find(goals.begin(), goals.end(), Goal::kFailure) != goals.end())
      for (const auto& b : g.id_sets) require_labels(b, "goal failure");
  } else {
    goals.push_back(Goal::kNewClass);
    bool labeled = std::all_of(g.id_sets.begin(), g.id_sets.end(), labels_permit_failure);
    if (labeled) goals.push_back(Goal::kFailure);
  }
  if (goals.empty()) fail(ErrorCode::kConfig, "no goals selected");

  Scores scores(rc, g.train, concat(g.id_sets, g.ood_sets));
  std::string csv = "detector,id_set,ood_set,goal,auroc,tie_mass,n_id,n_ood\n";
  json rows = json::array();
  for (const auto& det : rc.detectors) {
    const std::string label = det.label();
    for (const auto& id : g.id_sets) {
      ScoredBundle id_side{&id, &scores.get(label, id.name)};
      for (const auto& ood : g.ood_sets) {
        ScoredBundle shift{&ood, &scores.get(label, ood.name)};
        for (Goal goal : goals) {
          EvaluationFrame frame = build_frame(goal, id_side, std::span<const ScoredBundle>(&shift, 1));
          AurocResult r = frame_auroc(frame);
          csv += csv_field(label) + "," + csv_field(id.name) + "," + csv_field(ood.name) + "," +
                 goal_name(goal) + "," + fmt(r.auroc) + "," + fmt(r.tie_mass) + "," +
                 std::to_string(r.n_id) + "," + std::to_string(r.n_ood) + "\n";
          json row = {{"detector", label},     {"id_set", id.name},   {"ood_set", ood.name},
                      {"goal", goal_name(goal)}, {"auroc", r.auroc},  {"tie_mass", r.tie_mass},
                      {"n_id", r.n_id},        {"n_ood", r.n_ood}};
          if (goal == Goal::kNewClass && frame.correct_mask)
            row["decomposition"] = decomposition_json(decompose(frame));
          rows.push_back(row);
        }
      }
    }
  }
  out.write_csv("eval.csv", csv);
  out.write_json("eval.json", {{"rows", rows}});
  out.finish();
}

void cmd_decompose(const RunConfig& rc) {
  OutputDir out(rc, "decompose");
  GridInputs g = load_grid(rc, out);
  for (const auto& b : g.id_sets) require_labels(b, "decomposition");
  Scores scores(rc, g.train, concat(g.id_sets, g.ood_sets));
  std::string csv =
      "detector,id_set,ood_set,auroc_total,auroc_correct,auroc_incorrect,auroc_correct_vs_incorrect,"
      "accuracy,n_correct,n_incorrect,n_ood\n";
  for (const auto& det : rc.detectors) {
    const std::string label = det.label();
    for (const auto& id : g.id_sets) {
      ScoredBundle id_side{&id, &scores.get(label, id.name)};
      for (const auto& ood : g.ood_sets) {
        ScoredBundle shift{&ood, &scores.get(label, ood.name)};
        Decomposition d =
            decompose(build_frame(Goal::kNewClass, id_side, std::span<const ScoredBundle>(&shift, 1)));
        csv += csv_field(label) + "," + csv_field(id.name) + "," + csv_field(ood.name) + "," +
               fmt(d.auroc_total) + "," + fmt(d.auroc_correct) + "," + fmt(d.auroc_incorrect) + "," +
               fmt(d.auroc_correct_vs_incorrect) + "," + fmt(d.accuracy) + "," +
               std::to_string(d.n_correct) + "," + std::to_string(d.n_incorrect) + "," +
               std::to_string(d.n_ood) + "\n";
      }
    }
  }
  out.write_csv("decompose.csv", csv);
  out.finish();
}

void cmd_reject(const RunConfig& rc) {
  OutputDir out(rc, "reject");
  GridInputs g = load_grid(rc, out);
  for (const auto& b : g.id_sets) require_labels(b, "rejection table");
  Scores scores(rc, g.train, concat(g.id_sets, g.ood_sets));
  std::string csv = "detector,ood_set,reject_fraction,tau,pool,n,rejected_fraction\n";
  for (const auto& det : rc.detectors) {
    const std::string label = det.label();
    std::vector<std::vector<double>> correct;
    for (const auto& id : g.id_sets) correct.push_back(pooled_correct(id, scores.get(label, id.name)));
    std::vector<RejectionPool> pools;
    for (std::size_t i = 0; i < g.id_sets.size(); ++i) pools.push_back({g.id_sets[i].name, correct[i]});
    for (const auto& ood : g.ood_sets) {
      RejectionTable t = rejection_table(scores.get(label, ood.name).values, pools, rc.reject_fraction);
      for (const auto& e : t.entries)
        csv += csv_field(label) + "," + csv_field(ood.name) + "," + fmt(t.reject_fraction) + "," +
               fmt(t.tau) + "," + csv_field(e.name) + "," + std::to_string(e.n) + "," +
               fmt(e.rejected_fraction) + "\n";
    }
  }
  out.write_csv("reject.csv", csv);
  out.finish();
}

void cmd_bins(const RunConfig& rc) {
  require_detectors(rc);
  require_path(rc.train, "train manifest");
  require_paths(rc.id_sets, "ID-side manifests");
  require_path(rc.reference, "reference embedding manifest");
  require_paths(rc.bin_sets, "bin sets");
  if (rc.bin_embeddings.size() != rc.bin_sets.size())
    fail(ErrorCode::kConfig, "bins: need one embedding manifest per bin set");
  require_paths(rc.bin_embeddings, "bin embeddings");
  if (rc.bins == 0) fail(ErrorCode::kConfig, "bins: count must be positive");

  OutputDir out(rc, "bins");
  DatasetBundle train = load_input(rc.train, out);
  DatasetBundle id = load_input(rc.id_sets.front(), out);
  DatasetBundle reference = load_input(rc.reference, out);
  std::vector<DatasetBundle> sets = load_inputs(rc.bin_sets, out);
  std::vector<DatasetBundle> embeddings = load_inputs(rc.bin_embeddings, out);
  std::vector<const DatasetBundle*> named{&id};
  for (const auto& s : sets) named.push_back(&s);
  require_unique_names(named);
  if (!reference.features) fail(ErrorCode::kMissingInput, "reference embedding has no features");

  std::vector<std::vector<double>> distances(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!embeddings[i].features)
      fail(ErrorCode::kMissingInput, "embedding '" + embeddings[i].name + "' has no features");
    if (embeddings[i].rows() != sets[i].rows())
      fail(ErrorCode::kConsistency, "embedding '" + embeddings[i].name + "' has " +
                                        std::to_string(embeddings[i].rows()) + " rows, set '" +
                                        sets[i].name + "' has " + std::to_string(sets[i].rows()));
    distances[i] = nn_distances(*embeddings[i].features, *reference.features);
  }

  std::vector<DatasetBundle> scored{id};
  scored.insert(scored.end(), sets.begin(), sets.end());
  Scores scores(rc, train, scored);

  std::string bins_csv = "detector,set,bin,n,mean_distance,auroc\n";
  std::string fit_csv = "detector,set,n,degenerate,beta,alpha,se_beta,se_alpha,ci_low,ci_high\n";
  std::string overlap_csv = "detector,set_a,set_b,overlap\n";
  for (const auto& det : rc.detectors) {
    const std::string label = det.label();
    const auto& id_scores = scores.get(label, id.name).values;
    std::vector<RegressionFit> fits;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      DistanceBins b = bin_by_distance(distances[i], scores.get(label, sets[i].name).values, id_scores, rc.bins);
      std::vector<double> x, y;
      for (std::size_t k = 0; k < b.bins.size(); ++k) {
        const auto& bin = b.bins[k];
        bins_csv += csv_field(label) + "," + csv_field(sets[i].name) + "," + std::to_string(k) + "," +
                    std::to_string(bin.members.size()) + "," + fmt(bin.mean_distance) + "," +
                    fmt(bin.auroc) + "\n";
        x.push_back(bin.mean_distance);
        y.push_back(bin.auroc);
      }
      RegressionFit f = ols_fit(x, y);
      fits.push_back(f);
      const double half = rc.ci_multiplier * f.se_alpha;
      fit_csv += csv_field(label) + "," + csv_field(sets[i].name) + "," + std::to_string(f.n) + "," +
                 (f.degenerate ? "true" : "false") + "," + fmt(f.beta) + "," + fmt(f.alpha) + "," +
                 fmt(f.se_beta) + "," + fmt(f.se_alpha) + "," + fmt(f.alpha - half) + "," +
                 fmt(f.alpha + half) + "\n";
    }
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i + 1; j < sets.size(); ++j) {
        std::string verdict = "undefined";
        if (!fits[i].degenerate && !fits[j].degenerate)
          verdict = intercept_ci_overlap(fits[i], fits[j], rc.ci_multiplier).overlap ? "true" : "false";
        overlap_csv += csv_field(label) + "," + csv_field(sets[i].name) + "," + csv_field(sets[j].name) +
                       "," + verdict + "\n";
      }
  }
  out.write_csv("bins.csv", bins_csv);
  out.write_csv("bins_regression.csv", fit_csv);
  out.write_csv("bins_ci_overlap.csv", overlap_csv);
  out.finish();
}

void cmd_rankdiff(const RunConfig& rc) {
  require_detectors(rc);
  require_path(rc.train, "train manifest");
  std::string dataset = rc.rank_dataset;
  if (dataset.empty() && !rc.ood_sets.empty()) dataset = rc.ood_sets.front();
  require_path(dataset, "rankdiff dataset");
  auto find = [&](const std::string& name) -> const DetectorConfig& {
    for (const auto& d : rc.detectors)
      if (d.label() == name) return d;
    fail(ErrorCode::kConfig, "rankdiff: no detector named '" + name + "'");
  };
  if ((rc.rank_a.empty() || rc.rank_b.empty()) && rc.detectors.size() < 2)
    fail(ErrorCode::kConfig, "rankdiff needs two detectors");
  const DetectorConfig a = rc.rank_a.empty() ? rc.detectors[0] : find(rc.rank_a);
  const DetectorConfig b = rc.rank_b.empty() ? rc.detectors[1] : find(rc.rank_b);
  if (a.label() == b.label()) fail(ErrorCode::kConfig, "rankdiff compares a detector with itself");

  OutputDir out(rc, "rankdiff");
  DatasetBundle train = load_input(rc.train, out);
  DatasetBundle data = load_input(dataset, out);
  RunConfig pair = rc;
  pair.detectors = {a, b};
  Scores scores(pair, train, {data});
  auto rows = rank_discrepancy(scores.get(a.label(), data.name).values,
                               scores.get(b.label(), data.name).values, rc.top_n);
  std::string csv = "position,index,rank_a,rank_b,difference\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv += std::to_string(i + 1) + "," + std::to_string(rows[i].index) + "," + fmt(rows[i].rank_a) + "," +
           fmt(rows[i].rank_b) + "," + fmt(rows[i].difference) + "\n";
  out.write_csv("rankdiff.csv", csv);
  out.finish({{"detector_a", a.label()}, {"detector_b", b.label()}, {"dataset", data.name}});
}

void cmd_hist(const RunConfig& rc) {
  require_detectors(rc);
  require_path(rc.train, "train manifest");
  std::vector<std::string> paths = rc.id_sets;
  paths.insert(paths.end(), rc.ood_sets.begin(), rc.ood_sets.end());
  require_paths(paths, "dataset manifests");
  if (rc.hist_bins == 0) fail(ErrorCode::kConfig, "hist: bins must be positive");
  OutputDir out(rc, "hist");
  DatasetBundle train = load_input(rc.train, out);
  std::vector<DatasetBundle> data = load_inputs(paths, out);
  std::vector<const DatasetBundle*> ptrs;
  for (const auto& b : data) ptrs.push_back(&b);
  require_unique_names(ptrs);
  Scores scores(rc, train, data);
  std::string csv = "detector,dataset,bin,low,high,count\n";
  for (const auto& det : rc.detectors)
    for (const auto& ds : data) {
      Histogram h = score_histogram(scores.get(det.label(), ds.name).values, rc.hist_bins);
      for (std::size_t k = 0; k < h.counts.size(); ++k)
        csv += csv_field(det.label()) + "," + csv_field(ds.name) + "," + std::to_string(k) + "," +
               fmt(h.edges[k]) + "," + fmt(h.edges[k + 1]) + "," + std::to_string(h.counts[k]) + "\n";
    }
  out.write_csv("hist.csv", csv);
  out.finish();
}

void cmd_sanity(const RunConfig& rc) {
  const SanityParams& p = rc.sanity;
  if (p.height == 0 || p.width == 0 || p.channels == 0)
    fail(ErrorCode::kConfig, "sanity: image shape must be positive");
  const std::size_t pixels = p.height * p.width * p.channels;
  std::vector<std::size_t> dims = p.dims;
  if (dims.empty()) dims = {pixels, 128, 64, 10};
  if (dims.size() < 3) fail(ErrorCode::kConfig, "sanity: dims needs an input, a feature and a logit width");
  if (dims.front() != pixels)
    fail(ErrorCode::kConfig, "sanity: first dim " + std::to_string(dims.front()) + " does not match H*W*C = " +
                                 std::to_string(pixels));

  std::vector<DetectorConfig> detectors = rc.detectors;
  if (detectors.empty())
    for (DetectorKind k : {DetectorKind::kMsp, DetectorKind::kMaxLogit, DetectorKind::kEnergy,
                           DetectorKind::kMaxCosine, DetectorKind::kOdinTemp, DetectorKind::kMahalanobis,
                           DetectorKind::kKnn, DetectorKind::kVim, DetectorKind::kReact, DetectorKind::kAshB}) {
      DetectorConfig c;
      c.kind = k;
      detectors.push_back(c);
    }

  std::vector<Corruption> corruptions;
  if (!p.noise && !p.blur && !p.zoom) {
    corruptions = default_corruptions();
  } else {
    auto add = [&](CorruptionKind kind, const std::optional<std::vector<double>>& sev) {
      if (sev)
        for (double s : *sev) corruptions.push_back({kind, s});
    };
    add(CorruptionKind::kNoise, p.noise);
    add(CorruptionKind::kBlur, p.blur);
    add(CorruptionKind::kZoom, p.zoom);
  }
  for (const auto& c : corruptions) {
    const bool ok = c.kind == CorruptionKind::kZoom ? c.severity >= 1.0 : c.severity > 0.0;
    if (!ok) fail(ErrorCode::kConfig, "sanity: invalid " + c.name() + " severity " + fmt(c.severity));
  }
  if (corruptions.empty()) fail(ErrorCode::kConfig, "sanity: no corruptions selected");

  SanityConfig sc;
  sc.layer_dims = dims;
  sc.master_seed = rc.seed;
  sc.jobs = rc.jobs;
  if (!p.seeds.empty()) {
    sc.extractor_seeds = p.seeds;
  } else {
    if (p.seed_count == 0) fail(ErrorCode::kConfig, "sanity: seed count must be positive");
    for (std::size_t i = 0; i < p.seed_count; ++i) sc.extractor_seeds.push_back(derive_seed(rc.seed, {0x5eed, i}));
  }

  if (!p.images.empty()) require_path(p.images, "sanity image file");
  OutputDir out(rc, "sanity");
  std::vector<ImageTensor> images;
  if (!p.images.empty()) {
    out.add_input(p.images);
    npy::Array arr = npy::read(p.images);
    if (arr.shape.size() != 2 || arr.shape[1] != pixels)
      fail(ErrorCode::kShape, "sanity images must be N x " + std::to_string(pixels));
    std::vector<double> v = npy::to_f64(arr);
    for (std::size_t i = 0; i < arr.shape[0]; ++i) {
      ImageTensor img(p.height, p.width, p.channels);
      std::copy(v.begin() + i * pixels, v.begin() + (i + 1) * pixels, img.values.begin());
      for (double x : img.values)
        if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::kValidation, "sanity image values must lie in [0, 1]");
      images.push_back(std::move(img));
    }
  } else {
    images = synthetic_images(p.image_count, p.height, p.width, p.channels, derive_seed(rc.seed, {0x1a6e}));
  }
  if (images.size() < 2) fail(ErrorCode::kConfig, "sanity needs at least two images");

  auto cells = sanity_run(sc, images, corruptions, detectors);
  std::string csv = "seed,corruption,severity,detector,auroc,n\n";
  json errors = json::array();
  for (const auto& c : cells) {
    csv += std::to_string(c.seed) + "," + c.corruption + "," + fmt(c.severity) + "," + csv_field(c.detector) +
           "," + fmt(c.auroc) + "," + std::to_string(c.n) + "\n";
    if (!c.error.empty())
      errors.push_back({{"seed", c.seed}, {"corruption", c.corruption}, {"severity", c.severity},
                        {"detector", c.detector}, {"error", c.error}});
  }
  out.write_csv("sanity.csv", csv);
  json seeds = sc.extractor_seeds;
  out.finish({{"extractor_seeds", seeds}, {"layer_dims", dims}, {"images", images.size()}, {"cell_errors", errors}});
}

void cmd_curate(const RunConfig& rc) {
  const CurationParams& p = rc.curation;
  require_path(p.edges, "hierarchy edges file");
  if (!p.names.empty()) require_path(p.names, "hierarchy names file");
  require_path(p.ids, "ID class list");
  OutputDir out(rc, "curate");
  out.add_input(p.edges);
  if (!p.names.empty()) out.add_input(p.names);
  out.add_input(p.ids);
  Hierarchy h = p.names.empty() ? Hierarchy::load(p.edges) : Hierarchy::load(p.edges, fs::path(p.names));
  std::vector<std::string> ids = read_id_list(p.ids);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  CurationOptions opts;
  opts.organism_root = p.organism_root;
  opts.restrict_to_sisters = p.restrict_to_sisters;
  opts.sisters_first = p.sisters_first;
  opts.policy = p.policy;
  CurationResult r = curate(h, ids, opts);

  out.write_csv("audit.csv", audit_csv(r));
  std::string final_list;
  for (const auto& c : r.final_classes) final_list += c + "\n";
  out.write_text("final_classes.txt", final_list);
  json boundary = json::object();
  for (const auto& [c, e] : r.boundary)
    boundary[c] = {{"g", e.g}, {"lca", e.lca ? json(*e.lca) : json(nullptr)}};
  out.write_json("curation.json", {{"final_classes", r.final_classes},
                                   {"warnings", r.warnings},
                                   {"boundary", boundary},
                                   {"candidates_after_closures", r.candidates_after_closures},
                                   {"candidates_after_organism", r.candidates_after_organism}});
  out.finish();
}

}  // namespace shiftbench::cli
