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
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Tolerances are pinned below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "analysis.hpp"
#include "curation.hpp"
#include "detectors.hpp"
#include "evaluation.hpp"
#include "rng.hpp"
#include "tensor_store.hpp"

namespace fs = std::filesystem;
using namespace shiftbench;

namespace {

constexpr double kAurocTol = 1e-12;
constexpr double kAurocRuntimeLimit = 2.0;
constexpr double kDecompositionTol = 1e-12;
constexpr double kVimEnergyTol = 1e-9;
constexpr double kAshSumRelTol = 1e-9;
constexpr double kOlsRelTol = 1e-10;
constexpr double kSeparationRuntimeLimit = 30.0;

// Monte-Carlo reference values from synthetic_oracle.py (10^5 samples).
constexpr double kOracleMahalanobis = 0.998445;
constexpr double kOracleKnn = 0.997568;
constexpr double kOracleMsp = 0.999926;
constexpr double kFeatureTol = 0.02;
constexpr double kMspTol = 0.03;
constexpr double kOracleFloor = 0.95;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::size_t uniform_int(Xoshiro256& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
}

// Pair-counting AUROC, ties worth one half.
double pair_count_auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  long double wins = 0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0L : (p == n ? 0.5L : 0.0L);
  return static_cast<double>(wins / (static_cast<long double>(pos.size()) * neg.size()));
}

// Scores drawn from a small pool of values so about 30% of draws repeat an
// earlier value.
std::vector<double> tied_scores(Xoshiro256& rng, std::size_t n, std::vector<double>& pool) {
  std::vector<double> v(n);
  for (auto& x : v) {
    if (!pool.empty() && rng.uniform() < 0.3) {
      x = pool[uniform_int(rng, 0, pool.size() - 1)];
    } else {
      x = rng.normal();
      pool.push_back(x);
    }
  }
  return v;
}

Outcome auroc_oracle_equivalence() {
  Xoshiro256 rng(101);
  double worst = 0.0;
  double elapsed = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> pool;
    auto pos = tied_scores(rng, uniform_int(rng, 1, 200), pool);
    auto neg = tied_scores(rng, uniform_int(rng, 1, 200), pool);
    auto t0 = std::chrono::steady_clock::now();
    double fast = auroc(pos, neg).auroc;
    elapsed += seconds_since(t0);
    worst = std::max(worst, std::abs(fast - pair_count_auroc(pos, neg)));
  }
  return {worst <= kAurocTol && elapsed < kAurocRuntimeLimit,
          "max |rank - pairs| = " + num(worst) + " (tol 1e-12), rank-based runtime " + num(elapsed) +
              " s (limit 2 s)"};
}

Outcome decomposition_identity() {
  Xoshiro256 rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> pool;
    const std::size_t n_id = uniform_int(rng, 2, 150);
    auto id = tied_scores(rng, n_id, pool);
    auto ood = tied_scores(rng, uniform_int(rng, 1, 150), pool);
    std::vector<bool> correct(n_id);
    for (std::size_t i = 0; i < n_id; ++i) correct[i] = rng.uniform() < 0.7;
    correct[0] = true;
    correct[1] = false;
    Decomposition d = decompose(id, correct, ood);
    const double rebuilt = d.accuracy * *d.auroc_correct + (1.0 - d.accuracy) * *d.auroc_incorrect;
    worst = std::max(worst, std::abs(d.auroc_total - rebuilt));
  }
  return {worst <= kDecompositionTol, "max |total - (w*correct + (1-w)*incorrect)| = " + num(worst) +
                                          " over 200 frames (tol 1e-12)"};
}

LinearHead random_head(Xoshiro256& rng, std::size_t classes, std::size_t dim) {
  std::vector<float> w(classes * dim);
  for (auto& x : w) x = static_cast<float>(rng.normal());
  LinearHead head;
  head.weights = Matrix(classes, dim, w);
  head.bias.resize(classes);
  for (auto& b : head.bias) b = static_cast<float>(0.5 * rng.normal());
  return head;
}

// Rectified Gaussian features; logits stored as float(W z + b).
DatasetBundle random_bundle(Xoshiro256& rng, const LinearHead& head, std::size_t n, Role role) {
  const std::size_t dim = head.dim();
  const std::size_t classes = head.classes();
  std::vector<float> z(n * dim);
  for (auto& x : z) x = static_cast<float>(std::max(0.0, rng.normal() + 0.3));
  std::vector<float> logits(n * classes);
  std::vector<std::int32_t> labels(n);
  std::vector<double> zd(dim), out(classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) zd[j] = z[i * dim + j];
    head.apply(zd, out);
    for (std::size_t c = 0; c < classes; ++c) logits[i * classes + c] = static_cast<float>(out[c]);
    labels[i] = static_cast<std::int32_t>(uniform_int(rng, 0, classes - 1));
  }
  DatasetBundle b;
  b.name = "random";
  b.role = role;
  b.features = FeatureMatrix(n, dim, z);
  b.logits = LogitMatrix(n, classes, logits);
  b.labels = LabelVector(labels);
  b.head = head;
  return b;
}

Outcome degenerate_equivalences() {
  Xoshiro256 rng(303);
  std::size_t react_mismatch = 0, odin_mismatch = 0;
  double vim_worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = uniform_int(rng, 4, 24);
    const std::size_t classes = uniform_int(rng, 2, 8);
    LinearHead head = random_head(rng, classes, dim);
    DatasetBundle train = random_bundle(rng, head, uniform_int(rng, 3 * dim, 6 * dim), Role::kTrainId);
    DatasetBundle test = random_bundle(rng, head, 40, Role::kTestId);

    auto react = FittedDetector::react(head, std::numeric_limits<double>::infinity());
    DetectorConfig vim_cfg;
    vim_cfg.kind = DetectorKind::kVim;
    vim_cfg.principal_dim = dim;
    auto vim = fit(vim_cfg, train);
    DetectorConfig odin_cfg;
    odin_cfg.kind = DetectorKind::kOdinTemp;
    odin_cfg.temperature = 1.0;
    auto odin = fit(odin_cfg, train);
    DetectorConfig msp_cfg;
    auto msp = fit(msp_cfg, train);

    auto s_react = react.score(test).values;
    auto s_vim = vim.score(test).values;
    auto s_odin = odin.score(test).values;
    auto s_msp = msp.score(test).values;
    std::vector<double> z(dim), l(classes);
    for (std::size_t i = 0; i < test.rows(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) z[j] = (*test.features)(i, j);
      head.apply(z, l);
      // Independent log-sum-exp in long double, rounded once.
      long double m = *std::max_element(l.begin(), l.end());
      long double acc = 0;
      for (double x : l) acc += std::exp(static_cast<long double>(x) - m);
      const double energy_ref = static_cast<double>(m + std::log(acc));
      const double energy_lib = scoring::energy(l, 1.0);
      if (std::memcmp(&s_react[i], &energy_lib, sizeof(double)) != 0) ++react_mismatch;
      vim_worst = std::max(vim_worst, std::abs(s_vim[i] - energy_ref));
      if (std::memcmp(&s_odin[i], &s_msp[i], sizeof(double)) != 0) ++odin_mismatch;
    }
  }
  return {react_mismatch == 0 && odin_mismatch == 0 && vim_worst <= kVimEnergyTol,
          "react(+inf) vs energy: " + std::to_string(react_mismatch) + " bitwise mismatches; odin(T=1) vs msp: " +
              std::to_string(odin_mismatch) + " bitwise mismatches; max |vim(D) - energy| = " + num(vim_worst) +
              " (tol 1e-9); 100 fixtures"};
}

Outcome ash_structure() {
  Xoshiro256 rng(404);
  std::size_t worst_distinct = 0;
  double worst_rel = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = uniform_int(rng, 2, 512);
    std::vector<double> z(dim);
    for (auto& x : z) x = std::max(0.0, rng.normal());
    z[uniform_int(rng, 0, dim - 1)] = 1.0 + rng.uniform();  // at least one positive entry
    const double keep = 1.0 + 99.0 * rng.uniform();
    auto shaped = scoring::ash_b_shape(z, keep);
    std::set<double> distinct(shaped.begin(), shaped.end());
    long double before = 0, after = 0;
    for (double x : z) before += x;
    for (double x : shaped) after += x;
    worst_distinct = std::max(worst_distinct, distinct.size());
    worst_rel = std::max(worst_rel, static_cast<double>(std::fabs(after - before) / std::fabs(before)));
  }
  return {worst_distinct <= 2 && worst_rel <= kAshSumRelTol,
          "max distinct values " + std::to_string(worst_distinct) + " (limit 2); max relative sum error " +
              num(worst_rel) + " (tol 1e-9); 100 vectors"};
}

// Ten unit-covariance classes in 32 dims with centres 10 apart; the OOD
// Gaussian sits at the class centroid shifted orthogonally, 8 from each mean.
Outcome synthetic_separation() {
  constexpr std::size_t kDim = 32, kClasses = 10, kTrainPerClass = 200, kEval = 2000;
  const double a = 10.0 / std::sqrt(2.0);
  std::vector<std::vector<double>> means(kClasses, std::vector<double>(kDim, 0.0));
  for (std::size_t c = 0; c < kClasses; ++c) means[c][c] = a;
  std::vector<double> ood_centre(kDim, a / kClasses);
  for (std::size_t j = kClasses; j < kDim; ++j) ood_centre[j] = 0.0;
  ood_centre[kClasses] = std::sqrt(19.0);
  for (const auto& m : means) {
    double d2 = 0;
    for (std::size_t j = 0; j < kDim; ++j) d2 += (m[j] - ood_centre[j]) * (m[j] - ood_centre[j]);
    if (std::abs(std::sqrt(d2) - 8.0) > 1e-12) return {false, "OOD centre construction is off"};
  }

  LinearHead head;
  std::vector<float> w(kClasses * kDim, 0.0f);
  for (std::size_t c = 0; c < kClasses; ++c) w[c * kDim + c] = static_cast<float>(a);
  head.weights = Matrix(kClasses, kDim, w);
  head.bias.assign(kClasses, static_cast<float>(-0.5 * a * a));

  Xoshiro256 rng(505);
  auto make = [&](std::size_t n, bool ood, Role role) {
    std::vector<float> z(n * kDim);
    std::vector<std::int32_t> y(n, kNoLabel);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& centre = ood ? ood_centre : means[i % kClasses];
      if (!ood) y[i] = static_cast<std::int32_t>(i % kClasses);
      for (std::size_t j = 0; j < kDim; ++j) z[i * kDim + j] = static_cast<float>(centre[j] + rng.normal());
    }
    DatasetBundle b;
    b.name = ood ? "ood" : "id";
    b.role = role;
    b.features = FeatureMatrix(n, kDim, z);
    std::vector<float> logits(n * kClasses);
    std::vector<double> zd(kDim), out(kClasses);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < kDim; ++j) zd[j] = z[i * kDim + j];
      head.apply(zd, out);
      for (std::size_t c = 0; c < kClasses; ++c) logits[i * kClasses + c] = static_cast<float>(out[c]);
    }
    b.logits = LogitMatrix(n, kClasses, logits);
    b.labels = LabelVector(y);
    b.head = head;
    return b;
  };

  auto t0 = std::chrono::steady_clock::now();
  DatasetBundle train = make(kTrainPerClass * kClasses, false, Role::kTrainId);
  DatasetBundle id = make(kEval, false, Role::kTestId);
  DatasetBundle ood = make(kEval, true, Role::kSemanticShift);
  auto run = [&](DetectorKind kind) {
    DetectorConfig c;
    c.kind = kind;
    auto det = fit(c, train);
    return auroc(det.score(id).values, det.score(ood).values).auroc;
  };
  const double maha = run(DetectorKind::kMahalanobis);
  const double knn = run(DetectorKind::kKnn);
  const double msp = run(DetectorKind::kMsp);
  const double elapsed = seconds_since(t0);
  const bool pass = std::abs(maha - kOracleMahalanobis) <= kFeatureTol &&
                    std::abs(knn - kOracleKnn) <= kFeatureTol && std::abs(msp - kOracleMsp) <= kMspTol &&
                    kOracleMahalanobis > kOracleFloor && kOracleKnn > kOracleFloor &&
                    elapsed < kSeparationRuntimeLimit;
  return {pass, "mahalanobis " + num(maha) + " (oracle " + num(kOracleMahalanobis) + " +/- 0.02), knn " +
                    num(knn) + " (oracle " + num(kOracleKnn) + " +/- 0.02), msp " + num(msp) + " (oracle " +
                    num(kOracleMsp) + " +/- 0.03), runtime " + num(elapsed) + " s (limit 30 s)"};
}

Outcome null_sanity() {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Xoshiro256 rng(derive_seed(606, {seed}));
    std::vector<double> pos(2000), neg(2000);
    for (auto& x : pos) x = rng.uniform();
    for (auto& x : neg) x = rng.uniform();
    const double v = auroc(pos, neg).auroc;
    if (v >= 0.47 && v <= 0.53) ++inside;
  }
  return {inside >= 48, std::to_string(inside) + "/50 runs with AUROC in [0.47, 0.53] (need >= 48)"};
}

double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

Outcome ols_oracle() {
  Xoshiro256 rng(707);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = uniform_int(rng, 5, 200);
    const double beta = rng.normal(), alpha = rng.normal(), noise = 0.01 + rng.uniform();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 10.0 * rng.uniform();
      y[i] = alpha + beta * x[i] + noise * rng.normal();
    }
    // Normal equations (X'X) b = X'y with X = [1, x], solved in long double.
    long double sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += x[i];
      sxx += static_cast<long double>(x[i]) * x[i];
      sy += y[i];
      sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double det = n * sxx - sx * sx;
    const long double inv00 = sxx / det, inv01 = -sx / det, inv11 = n / det;
    const long double a_hat = inv00 * sy + inv01 * sxy;
    const long double b_hat = inv01 * sy + inv11 * sxy;
    long double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double r = y[i] - a_hat - b_hat * x[i];
      rss += r * r;
    }
    const long double sigma2 = rss / (n - 2);
    RegressionFit f = ols_fit(x, y);
    if (f.degenerate) return {false, "fixture unexpectedly degenerate"};
    worst = std::max({worst, rel_err(f.beta, static_cast<double>(b_hat)), rel_err(f.alpha, static_cast<double>(a_hat)),
                      rel_err(f.se_beta, static_cast<double>(std::sqrt(sigma2 * inv11))),
                      rel_err(f.se_alpha, static_cast<double>(std::sqrt(sigma2 * inv00)))});
  }
  RegressionFit a, b;
  a.degenerate = b.degenerate = false;
  a.alpha = 0.862;
  a.se_alpha = 0.006;
  b.alpha = 0.767;
  b.se_alpha = 0.006;
  CiComparison ci = intercept_ci_overlap(a, b, 2.0);
  const bool intervals = std::abs(ci.interval_a.first - 0.850) <= 1e-12 && std::abs(ci.interval_a.second - 0.874) <= 1e-12 &&
                         std::abs(ci.interval_b.first - 0.755) <= 1e-12 && std::abs(ci.interval_b.second - 0.779) <= 1e-12;
  return {worst <= kOlsRelTol && intervals && !ci.overlap,
          "max relative error vs normal equations " + num(worst) + " (tol 1e-10); intervals (" +
              num(ci.interval_a.first) + ", " + num(ci.interval_a.second) + ") and (" + num(ci.interval_b.first) +
              ", " + num(ci.interval_b.second) + "), overlap " + (ci.overlap ? "true" : "false")};
}

const char* kToyEdges =
    "organism\troot\nartifact\troot\ndog\torganism\ncat\torganism\n"
    "vehicle\tartifact\ncar\tvehicle\ntruck\tvehicle\n"
    "instrument\tartifact\nviolin\tinstrument\nviola\tinstrument\n";

std::map<std::string, std::string> categories(const CurationResult& r) {
  std::map<std::string, std::string> m;
  for (const auto& row : r.audit) m[row.node_id] = audit_category_name(row.category);
  return m;
}

Outcome curation_golden() {
  Hierarchy h = Hierarchy::parse(kToyEdges);
  CurationOptions opts;
  opts.organism_root = "organism";
  CurationResult r = curate(h, {"car", "violin"}, opts);
  const std::string golden =
      "node_id,name,category,via_id_class,g_class\n"
      "artifact,,excluded_hypernym,car,\n"
      "car,,id,,\n"
      "cat,,excluded_organism,,\n"
      "dog,,excluded_organism,,\n"
      "instrument,,excluded_hypernym,violin,\n"
      "organism,,excluded_organism,,\n"
      "root,,excluded_hypernym,car,\n"
      "truck,,excluded_covariate_grounded,car,vehicle\n"
      "vehicle,,excluded_hypernym,car,\n"
      "viola,,excluded_covariate_grounded,violin,instrument\n"
      "violin,,id,,\n";
  const bool toy = audit_csv(r) == golden && r.final_classes.empty();

  // car and truck meet at vehicle, so g(car) = car and g(truck) = truck;
  // violin meets them at artifact, so g(violin) = instrument and viola goes.
  CurationResult v = curate(h, {"car", "truck", "violin"}, opts);
  auto cat = categories(v);
  const bool variant = cat["viola"] == "excluded_covariate_grounded" && v.final_classes.empty() &&
                       v.boundary.at("car").g == "car" && v.boundary.at("violin").g == "instrument";
  // With the identity boundary viola is retained.
  CurationOptions identity = opts;
  identity.policy = BoundaryPolicy::kIdentity;
  CurationResult vi = curate(h, {"car", "truck", "violin"}, identity);
  const bool identity_keeps = vi.final_classes == ClassSet{"viola"};

  // Random DAGs: node i takes parents among 0..i-1; nodes without parents are roots.
  Xoshiro256 rng(808);
  std::size_t violations = 0, runs = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = uniform_int(rng, 2, 200);
    std::vector<std::vector<std::size_t>> parents(n);
    std::ostringstream edges;
    auto name = [](std::size_t i) { return "n" + std::to_string(i); };
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && rng.uniform() < 0.92) {
        const std::size_t k = uniform_int(rng, 1, std::min<std::size_t>(3, i));
        std::set<std::size_t> ps;
        while (ps.size() < k) ps.insert(uniform_int(rng, 0, i - 1));
        parents[i].assign(ps.begin(), ps.end());
        for (auto p : ps) edges << name(i) << '\t' << name(p) << '\n';
      } else {
        edges << name(i) << "\t\n";
      }
    }
    Hierarchy g = Hierarchy::parse(edges.str());
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t i = 0; i < n; ++i)
      for (auto p : parents[i]) children[p].push_back(i);
    auto closure = [&](std::size_t start, const std::vector<std::vector<std::size_t>>& next) {
      std::set<std::size_t> seen;
      std::vector<std::size_t> stack{start};
      while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        for (auto v : next[u])
          if (seen.insert(v).second) stack.push_back(v);
      }
      return seen;
    };
    std::set<std::size_t> ids;
    const std::size_t want = uniform_int(rng, 1, std::min<std::size_t>(6, n));
    while (ids.size() < want) ids.insert(uniform_int(rng, 0, n - 1));
    std::set<std::size_t> forbidden(ids.begin(), ids.end());
    for (auto c : ids) {
      for (auto a : closure(c, parents)) forbidden.insert(a);
      for (auto d : closure(c, children)) forbidden.insert(d);
    }
    CurationOptions o;
    if (rng.uniform() < 0.7) {
      const std::size_t root = uniform_int(rng, 0, n - 1);
      o.organism_root = name(root);
      forbidden.insert(root);
      for (auto d : closure(root, children)) forbidden.insert(d);
    }
    o.restrict_to_sisters = rng.uniform() < 0.3;
    o.sisters_first = rng.uniform() < 0.5;
    ClassSet id_names;
    for (auto c : ids) id_names.push_back(name(c));
    std::sort(id_names.begin(), id_names.end());
    CurationResult res = curate(g, id_names, o);
    ++runs;
    for (const auto& f : res.final_classes)
      if (forbidden.count(std::stoul(f.substr(1)))) ++violations;
  }
  return {toy && variant && identity_keeps && violations == 0,
          std::string("toy audit ") + (toy ? "matches" : "DIFFERS") + "; {car,truck,violin} " +
              (variant ? "excludes viola" : "WRONG") + " under deepest_lca" +
              (identity_keeps ? " and keeps it under identity" : ", identity WRONG") + "; " +
              std::to_string(violations) + " disjointness violations in " + std::to_string(runs) + " random DAGs"};
}

// ---- determinism through the CLI -------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && env -u SHIFTBENCH_OUT '" + SHIFTBENCH_CLI + "' " + args +
                          " > /dev/null 2> cli.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return files;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("shiftbench_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  Xoshiro256 rng(909);
  LinearHead head = random_head(rng, 6, 24);
  save_bundle(random_bundle(rng, head, 600, Role::kTrainId), dir / "train/manifest.json");
  DatasetBundle test = random_bundle(rng, head, 300, Role::kTestId);
  test.name = "test";
  save_bundle(test, dir / "test/manifest.json");
  DatasetBundle ood = random_bundle(rng, head, 300, Role::kSemanticShift);
  ood.name = "ood";
  ood.labels = LabelVector(std::vector<std::int32_t>(300, kNoLabel));
  save_bundle(ood, dir / "ood/manifest.json");
  std::ofstream(dir / "run.toml") << "seed = 11\n"
                                     "[data]\n"
                                     "train = \"train/manifest.json\"\n"
                                     "id = [\"test/manifest.json\"]\n"
                                     "ood = [\"ood/manifest.json\"]\n"
                                     "[[detector]]\nkind = \"msp\"\n"
                                     "[[detector]]\nkind = \"energy\"\n"
                                     "[[detector]]\nkind = \"mahalanobis\"\n"
                                     "[[detector]]\nkind = \"knn\"\nk = 10\n"
                                     "[[detector]]\nkind = \"vim\"\nprincipal_dim = 12\n"
                                     "[[detector]]\nkind = \"react\"\n"
                                     "[[detector]]\nkind = \"ash_b\"\n"
                                     "[sanity]\n"
                                     "height = 8\nwidth = 8\nchannels = 3\n"
                                     "count = 40\n";
  std::string detail;
  bool ok = true;
  for (const char* out : {"a_j1", "b_j1", "c_j8", "d_j8"}) {
    const std::string jobs = std::string(out).substr(3);
    for (const char* cmd : {"eval", "sanity"}) {
      int code = run_cli(dir, std::string(cmd) + " -c run.toml -o " + out + " --jobs " + jobs);
      if (code != 0) {
        ok = false;
        detail += std::string(cmd) + " exited " + std::to_string(code) + ": " + slurp(dir / "cli.err") + "; ";
      }
    }
  }
  std::size_t compared = 0;
  if (ok) {
    auto ref = snapshot(dir / "a_j1");
    for (const char* other : {"b_j1", "c_j8", "d_j8"}) {
      auto snap = snapshot(dir / other);
      if (snap != ref) {
        ok = false;
        detail += std::string(other) + " differs from a_j1; ";
      }
    }
    compared = ref.size();
    ok = ok && ref.count("eval.csv") && ref.count("eval.json") && ref.count("sanity.csv");
  }
  fs::remove_all(dir);
  return {ok, detail + std::to_string(compared) + " files byte-identical across 2 runs at --jobs 1 and 2 at --jobs 8"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"auroc_oracle_equivalence", auroc_oracle_equivalence},
      {"decomposition_identity", decomposition_identity},
      {"degenerate_detector_equivalences", degenerate_equivalences},
      {"ash_b_structure", ash_structure},
      {"synthetic_separation", synthetic_separation},
      {"null_sanity", null_sanity},
      {"ols_oracle_and_interval_example", ols_oracle},
      {"curation_golden_and_disjointness", curation_golden},
      {"determinism_eval_sanity_jobs", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
