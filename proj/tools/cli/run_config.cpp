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
#include "run_config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"
#include "toml_lite.hpp"

namespace shiftbench::cli {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorCode::kConfig, where + ": " + what);
}

// Typed view of one config table that rejects keys nobody asked for.
class Table {
 public:
  Table(const json& j, std::string where) : where_(std::move(where)) {
    if (!j.is_object()) bad(where_, "expected a table");
    j_ = &j;
  }

  ~Table() = default;

  void finish() const {
    for (const auto& [key, value] : j_->items())
      if (!seen_.count(key)) bad(where_, "unknown key '" + key + "'");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_->contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_->at(key);
  }

  std::string str(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) bad(where_, "'" + key + "' must be a string");
    return v.get<std::string>();
  }

  double num(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) bad(where_, "'" + key + "' must be a number");
    return v.get<double>();
  }

  std::uint64_t uint(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      bad(where_, "'" + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_boolean()) bad(where_, "'" + key + "' must be true or false");
    return v.get<bool>();
  }

  std::vector<std::string> strs(const std::string& key) {
    const json& v = raw(key);
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) bad(where_, "'" + key + "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) bad(where_, "'" + key + "' must be a list of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::vector<double> nums(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) bad(where_, "'" + key + "' must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) bad(where_, "'" + key + "' must be a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> uints(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) bad(where_, "'" + key + "' must be a list of integers");
    std::vector<std::uint64_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0)
        bad(where_, "'" + key + "' must be a list of nonnegative integers");
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }

  const std::string& where() const { return where_; }

 private:
  const json* j_ = nullptr;
  std::string where_;
  std::set<std::string> seen_;
};

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path.lexically_normal().string();
  return (base / path).lexically_normal().string();
}

std::vector<std::string> resolve_all(const std::filesystem::path& base,
                                     const std::vector<std::string>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(resolve(base, p));
  return out;
}

DetectorConfig detector_from_table(const json& j, std::size_t index) {
  Table t(j, "detector[" + std::to_string(index) + "]");
  if (!t.has("kind")) bad(t.where(), "missing 'kind'");
  const std::string kind = t.str("kind");
  auto parsed = parse_kind(kind);
  if (!parsed) bad(t.where(), "unknown detector kind '" + kind + "'");
  DetectorConfig c;
  c.kind = *parsed;
  if (t.has("name")) c.name = t.str("name");
  if (t.has("temperature")) c.temperature = t.num("temperature");
  if (t.has("k")) c.k = t.uint("k");
  if (t.has("principal_dim")) c.principal_dim = t.uint("principal_dim");
  if (t.has("clip_percentile")) c.clip_percentile = t.num("clip_percentile");
  if (t.has("keep_percent")) c.keep_percent = t.num("keep_percent");
  if (t.has("ridge_scale")) c.ridge_scale = t.num("ridge_scale");
  t.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    bad(t.where(), e.what());
  }
  return c;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base) {
  RunConfig rc;
  Table top(doc, "config");
  if (top.has("out")) rc.out = resolve(base, top.str("out"));
  if (top.has("seed")) rc.seed = top.uint("seed");
  if (top.has("jobs")) {
    rc.jobs = static_cast<unsigned>(top.uint("jobs"));
    if (rc.jobs == 0) bad("config", "'jobs' must be positive");
  }

  if (top.has("data")) {
    Table t(top.raw("data"), "data");
    if (t.has("train")) rc.train = resolve(base, t.str("train"));
    if (t.has("id")) rc.id_sets = resolve_all(base, t.strs("id"));
    if (t.has("ood")) rc.ood_sets = resolve_all(base, t.strs("ood"));
    if (t.has("detectors_dir")) rc.detectors_dir = resolve(base, t.str("detectors_dir"));
    t.finish();
  }

  if (top.has("detector")) {
    const json& list = top.raw("detector");
    if (!list.is_array()) bad("config", "'detector' must be an array of tables ([[detector]])");
    for (std::size_t i = 0; i < list.size(); ++i) rc.detectors.push_back(detector_from_table(list[i], i));
  }

  if (top.has("eval")) {
    Table t(top.raw("eval"), "eval");
    if (t.has("goals")) {
      std::vector<Goal> goals;
      for (const auto& g : t.strs("goals")) {
        auto parsed = parse_goal(g);
        if (!parsed) bad("eval", "unknown goal '" + g + "'");
        goals.push_back(*parsed);
      }
      rc.goals = goals;
    }
    t.finish();
  }

  if (top.has("reject")) {
    Table t(top.raw("reject"), "reject");
    if (t.has("fraction")) rc.reject_fraction = t.num("fraction");
    t.finish();
  }

  if (top.has("bins")) {
    Table t(top.raw("bins"), "bins");
    if (t.has("count")) rc.bins = t.uint("count");
    if (t.has("ci_multiplier")) rc.ci_multiplier = t.num("ci_multiplier");
    if (t.has("reference")) rc.reference = resolve(base, t.str("reference"));
    if (t.has("sets")) rc.bin_sets = resolve_all(base, t.strs("sets"));
    if (t.has("embeddings")) rc.bin_embeddings = resolve_all(base, t.strs("embeddings"));
    t.finish();
  }

  if (top.has("hist")) {
    Table t(top.raw("hist"), "hist");
    if (t.has("bins")) rc.hist_bins = t.uint("bins");
    t.finish();
  }

  if (top.has("rankdiff")) {
    Table t(top.raw("rankdiff"), "rankdiff");
    if (t.has("dataset")) rc.rank_dataset = resolve(base, t.str("dataset"));
    if (t.has("a")) rc.rank_a = t.str("a");
    if (t.has("b")) rc.rank_b = t.str("b");
    if (t.has("top")) rc.top_n = t.uint("top");
    t.finish();
  }

  if (top.has("sanity")) {
    Table t(top.raw("sanity"), "sanity");
    SanityParams& s = rc.sanity;
    if (t.has("seeds")) {
      const json& v = t.raw("seeds");
      if (v.is_array())
        s.seeds = t.uints("seeds");
      else
        s.seed_count = t.uint("seeds");
    }
    if (t.has("height")) s.height = t.uint("height");
    if (t.has("width")) s.width = t.uint("width");
    if (t.has("channels")) s.channels = t.uint("channels");
    if (t.has("dims")) {
      for (auto d : t.uints("dims")) s.dims.push_back(static_cast<std::size_t>(d));
    }
    if (t.has("images")) s.images = resolve(base, t.str("images"));
    if (t.has("count")) s.image_count = t.uint("count");
    if (t.has("noise")) s.noise = t.nums("noise");
    if (t.has("blur")) s.blur = t.nums("blur");
    if (t.has("zoom")) s.zoom = t.nums("zoom");
    t.finish();
  }

  if (top.has("curation")) {
    Table t(top.raw("curation"), "curation");
    CurationParams& c = rc.curation;
    if (t.has("edges")) c.edges = resolve(base, t.str("edges"));
    if (t.has("names")) c.names = resolve(base, t.str("names"));
    if (t.has("ids")) c.ids = resolve(base, t.str("ids"));
    if (t.has("organism_root")) c.organism_root = t.str("organism_root");
    if (t.has("restrict_to_sisters")) c.restrict_to_sisters = t.boolean("restrict_to_sisters");
    if (t.has("sisters_first")) c.sisters_first = t.boolean("sisters_first");
    if (t.has("policy")) {
      try {
        c.policy = parse_boundary_policy(t.str("policy"));
      } catch (const Error& e) {
        bad("curation", e.what());
      }
    }
    t.finish();
  }

  top.finish();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(parse_toml(ss.str()), path.parent_path());
}

json RunConfig::canonical() const {
  json j;
  j["seed"] = seed;
  j["data"] = {{"train", train}, {"id", id_sets}, {"ood", ood_sets}, {"detectors_dir", detectors_dir}};
  json dets = json::array();
  for (const auto& d : detectors) dets.push_back(detector_spec(d));
  j["detectors"] = dets;
  if (goals) {
    json g = json::array();
    for (Goal goal : *goals) g.push_back(goal_name(goal));
    j["goals"] = g;
  } else {
    j["goals"] = "auto";
  }
  j["reject_fraction"] = reject_fraction;
  j["bins"] = {{"count", bins},
               {"ci_multiplier", ci_multiplier},
               {"reference", reference},
               {"sets", bin_sets},
               {"embeddings", bin_embeddings}};
  j["hist_bins"] = hist_bins;
  j["rankdiff"] = {{"dataset", rank_dataset}, {"a", rank_a}, {"b", rank_b}, {"top", top_n}};
  json s;
  s["seed_count"] = sanity.seed_count;
  s["seeds"] = sanity.seeds;
  s["shape"] = {sanity.height, sanity.width, sanity.channels};
  s["dims"] = sanity.dims;
  s["images"] = sanity.images;
  s["count"] = sanity.image_count;
  s["noise"] = sanity.noise ? json(*sanity.noise) : json(nullptr);
  s["blur"] = sanity.blur ? json(*sanity.blur) : json(nullptr);
  s["zoom"] = sanity.zoom ? json(*sanity.zoom) : json(nullptr);
  j["sanity"] = s;
  j["curation"] = {{"edges", curation.edges},
                   {"names", curation.names},
                   {"ids", curation.ids},
                   {"organism_root", curation.organism_root ? json(*curation.organism_root) : json(nullptr)},
                   {"restrict_to_sisters", curation.restrict_to_sisters},
                   {"sisters_first", curation.sisters_first},
                   {"policy", boundary_policy_name(curation.policy)}};
  return j;
}

std::string RunConfig::hash() const { return fnv1a64_hex(canonical().dump()); }

}  // namespace shiftbench::cli
