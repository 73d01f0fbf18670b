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
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "error.hpp"
#include "run_config.hpp"
#include "version.hpp"

namespace {

using namespace shiftbench;
using namespace shiftbench::cli;

void print_error(const std::string& code, int exit_code, const std::string& message) {
  nlohmann::json j = {{"error", {{"code", code}, {"exit_code", exit_code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

// Flag values. Each is applied over the config file only when given.
struct Flags {
  std::string config;
  std::string out;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::string train;
  std::vector<std::string> id_sets;
  std::vector<std::string> ood_sets;
  std::vector<std::string> detectors;
  std::vector<std::string> goals;
  std::string detectors_dir;
  double reject_fraction = kDefaultRejectFraction;
  std::size_t bins = kDefaultBins;
  double ci_multiplier = kDefaultCiMultiplier;
  std::string reference;
  std::vector<std::string> bin_sets;
  std::vector<std::string> bin_embeddings;
  std::size_t hist_bins = kDefaultHistBins;
  std::string rank_dataset;
  std::string rank_a;
  std::string rank_b;
  std::size_t top_n = kDefaultTopN;
  std::size_t seeds = kDefaultSanitySeeds;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 3;
  std::vector<std::size_t> dims;
  std::string images;
  std::size_t image_count = kDefaultImageCount;
  std::vector<double> noise;
  std::vector<double> blur;
  std::vector<double> zoom;
  std::string edges;
  std::string names;
  std::string ids;
  std::string organism_root;
  bool restrict_to_sisters = false;
  bool sisters_first = false;
  std::string policy = "deepest_lca";
};

class Subcommand {
 public:
  Subcommand(CLI::App& app, Flags& f, const std::string& name, const std::string& help)
      : sub_(app.add_subcommand(name, help)), f_(f) {
    opt("--config,-c", f.config, "TOML run config; flags override its values");
    opt("--out,-o", f.out, "Output directory (env SHIFTBENCH_OUT overrides the config file)")
        ->default_str(kDefaultOut);
    opt("--jobs,-j", f.jobs, "Worker threads; results do not depend on it")->capture_default_str();
    opt("--seed", f.seed, "Master seed")->capture_default_str();
  }

  template <typename T>
  CLI::Option* opt(const std::string& name, T& target, const std::string& help) {
    CLI::Option* o = sub_->add_option(name, target, help);
    options_.push_back(o);
    return o;
  }

  CLI::Option* flag(const std::string& name, bool& target, const std::string& help) {
    CLI::Option* o = sub_->add_flag(name, target, help);
    options_.push_back(o);
    return o;
  }

  void data_flags() {
    opt("--train", f_.train, "train_id bundle manifest");
    opt("--id", f_.id_sets, "ID-side bundle manifests (test_id or covariate_shift)");
    opt("--ood", f_.ood_sets, "semantic_shift bundle manifests");
    opt("--detector,-d", f_.detectors, "Detector spec kind[:key=value,...]; replaces the config list");
  }

  CLI::App* app() const { return sub_; }

  bool given(const std::string& name) const {
    for (auto* o : options_)
      if (o->check_name(name)) return o->count() > 0;
    return false;
  }

 private:
  CLI::App* sub_;
  Flags& f_;
  std::vector<CLI::Option*> options_;
};

RunConfig resolve_config(const Subcommand& s, const Flags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (const char* env = std::getenv("SHIFTBENCH_OUT"); env && *env) rc.out = env;
  if (s.given("--out")) rc.out = f.out;
  if (s.given("--jobs")) {
    if (f.jobs == 0) fail(ErrorCode::kConfig, "--jobs must be positive");
    rc.jobs = f.jobs;
  }
  if (s.given("--seed")) rc.seed = f.seed;
  if (s.given("--train")) rc.train = f.train;
  if (s.given("--id")) rc.id_sets = f.id_sets;
  if (s.given("--ood")) rc.ood_sets = f.ood_sets;
  if (s.given("--detector")) {
    rc.detectors.clear();
    for (const auto& spec : f.detectors) rc.detectors.push_back(parse_detector_spec(spec));
  }
  if (s.given("--goal")) {
    std::vector<Goal> goals;
    for (const auto& g : f.goals) {
      auto parsed = parse_goal(g);
      if (!parsed) fail(ErrorCode::kConfig, "unknown goal '" + g + "'");
      goals.push_back(*parsed);
    }
    rc.goals = goals;
  }
  if (s.given("--detectors-dir")) rc.detectors_dir = f.detectors_dir;
  if (s.given("--reject-fraction")) rc.reject_fraction = f.reject_fraction;
  if (s.given("--bins")) rc.bins = f.bins;
  if (s.given("--ci-multiplier")) rc.ci_multiplier = f.ci_multiplier;
  if (s.given("--reference")) rc.reference = f.reference;
  if (s.given("--set")) rc.bin_sets = f.bin_sets;
  if (s.given("--embedding")) rc.bin_embeddings = f.bin_embeddings;
  if (s.given("--hist-bins")) rc.hist_bins = f.hist_bins;
  if (s.given("--dataset")) rc.rank_dataset = f.rank_dataset;
  if (s.given("--a")) rc.rank_a = f.rank_a;
  if (s.given("--b")) rc.rank_b = f.rank_b;
  if (s.given("--top")) rc.top_n = f.top_n;
  if (s.given("--seeds")) {
    rc.sanity.seed_count = f.seeds;
    rc.sanity.seeds.clear();
  }
  if (s.given("--height")) rc.sanity.height = f.height;
  if (s.given("--width")) rc.sanity.width = f.width;
  if (s.given("--channels")) rc.sanity.channels = f.channels;
  if (s.given("--dims")) rc.sanity.dims = f.dims;
  if (s.given("--images")) rc.sanity.images = f.images;
  if (s.given("--count")) rc.sanity.image_count = f.image_count;
  if (s.given("--noise")) rc.sanity.noise = f.noise;
  if (s.given("--blur")) rc.sanity.blur = f.blur;
  if (s.given("--zoom")) rc.sanity.zoom = f.zoom;
  if (s.given("--edges")) rc.curation.edges = f.edges;
  if (s.given("--names")) rc.curation.names = f.names;
  if (s.given("--ids")) rc.curation.ids = f.ids;
  if (s.given("--organism-root")) rc.curation.organism_root = f.organism_root;
  if (s.given("--restrict-to-sisters")) rc.curation.restrict_to_sisters = f.restrict_to_sisters;
  if (s.given("--sisters-first")) rc.curation.sisters_first = f.sisters_first;
  if (s.given("--policy")) rc.curation.policy = parse_boundary_policy(f.policy);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shiftbench: post-hoc OOD detector evaluation under semantic and covariate shift",
               "shiftbench"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.footer(
      "Detector kinds and defaults: msp, max_logit, energy (temperature=1), max_cosine,\n"
      "odin_temp (temperature=1000), mahalanobis (ridge_scale=1e-6), knn (k=max(1, min(1000, M/10))),\n"
      "vim (principal_dim=max(1, min(512, D/2))), react (clip_percentile=90), ash_b (keep_percent=65).\n"
      "Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical error.");
  Flags f;

  std::vector<std::pair<Subcommand, void (*)(const RunConfig&)>> subs;
  subs.reserve(10);
  auto add = [&](const std::string& name, const std::string& help, void (*fn)(const RunConfig&)) -> Subcommand& {
    subs.emplace_back(Subcommand(app, f, name, help), fn);
    return subs.back().first;
  };

  add("fit", "Fit detectors on the train bundle and save them under <out>/detectors", cmd_fit).data_flags();

  auto& score = add("score", "Score ID-side and shift bundles with previously fitted detectors", cmd_score);
  score.opt("--id", f.id_sets, "Bundle manifests to score");
  score.opt("--ood", f.ood_sets, "More bundle manifests to score");
  score.opt("--detector,-d", f.detectors, "Restrict to these detector specs (matched by name)");
  score.opt("--detectors-dir", f.detectors_dir, "Fitted detector directory")->default_str("<out>/detectors");

  auto& eval = add("eval", "AUROC for every detector x (ID set, shift set) pair x goal", cmd_eval);
  eval.data_flags();
  eval.opt("--goal", f.goals, "new_class and/or failure")->default_str("every goal the labels permit");

  add("decompose", "Split new-class AUROC by classifier correctness", cmd_decompose).data_flags();

  auto& reject = add("reject", "Fraction of correct ID examples rejected at a fixed OOD rejection rate", cmd_reject);
  reject.data_flags();
  reject.opt("--reject-fraction", f.reject_fraction, "Share of OOD examples to reject")->capture_default_str();

  auto& bins = add("bins", "AUROC against distance to the reference embedding, with OLS fits", cmd_bins);
  bins.data_flags();
  bins.opt("--bins", f.bins, "Equal-count distance bins per set")->capture_default_str();
  bins.opt("--ci-multiplier", f.ci_multiplier, "Intercept interval half-width in standard errors")
      ->capture_default_str();
  bins.opt("--reference", f.reference, "reference_embedding bundle manifest");
  bins.opt("--set", f.bin_sets, "Shift bundle manifests to bin");
  bins.opt("--embedding", f.bin_embeddings, "Reference-space features for each --set, same order");

  auto& rank = add("rankdiff", "Examples whose ranks differ most between two detectors", cmd_rankdiff);
  rank.data_flags();
  rank.opt("--dataset", f.rank_dataset, "Bundle to rank")->default_str("first --ood");
  rank.opt("--a", f.rank_a, "First detector name")->default_str("first detector");
  rank.opt("--b", f.rank_b, "Second detector name")->default_str("second detector");
  rank.opt("--top", f.top_n, "Rows to report")->capture_default_str();

  auto& hist = add("hist", "Score histograms per detector and dataset", cmd_hist);
  hist.data_flags();
  hist.opt("--hist-bins", f.hist_bins, "Equal-width bins")->capture_default_str();

  auto& sanity = add("sanity", "Random-network sanity check over synthetic corruptions", cmd_sanity);
  sanity.opt("--detector,-d", f.detectors, "Detector specs")->default_str("all ten kinds");
  sanity.opt("--seeds", f.seeds, "Number of random networks")->capture_default_str();
  sanity.opt("--height", f.height, "Image height")->capture_default_str();
  sanity.opt("--width", f.width, "Image width")->capture_default_str();
  sanity.opt("--channels", f.channels, "Image channels")->capture_default_str();
  sanity.opt("--dims", f.dims, "Layer widths, input first")->default_str("H*W*C 128 64 10");
  sanity.opt("--images", f.images, "NPY of N x (H*W*C) values in [0,1]")->default_str("synthetic");
  sanity.opt("--count", f.image_count, "Synthetic image count")->capture_default_str();
  sanity.opt("--noise", f.noise, "Gaussian noise sigmas")->default_str("0.05 0.1 0.2");
  sanity.opt("--blur", f.blur, "Blur sigmas in pixels")->default_str("1 2 4");
  sanity.opt("--zoom", f.zoom, "Zoom factors")->default_str("1.3 1.6 2");

  auto& cur = add("curate", "Select OOD classes from an is-a hierarchy", cmd_curate);
  cur.opt("--edges", f.edges, "child<TAB>parent TSV");
  cur.opt("--names", f.names, "id<TAB>name TSV");
  cur.opt("--ids", f.ids, "ID class list, one per line");
  cur.opt("--organism-root", f.organism_root, "Subtree to exclude");
  cur.flag("--restrict-to-sisters", f.restrict_to_sisters, "Keep only sisters of ID classes");
  cur.flag("--sisters-first", f.sisters_first, "Apply the sister restriction before the boundary stage");
  cur.opt("--policy", f.policy, "deepest_lca or identity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1]))
      message = std::string("unknown subcommand '") + argv[1] + "'";
    std::cerr << app.help() << "\n";
    print_error("usage", 2, message);
    return 2;
  }

  for (auto& [sub, fn] : subs) {
    if (!sub.app()->parsed()) continue;
    try {
      fn(resolve_config(sub, f));
      return 0;
    } catch (const Error& e) {
      const int code = exit_code_for(e.code());
      print_error(error_code_name(e.code()), code, e.what());
      return code;
    } catch (const std::exception& e) {
      print_error("internal", 1, e.what());
      return 1;
    }
  }
  return 2;
}
