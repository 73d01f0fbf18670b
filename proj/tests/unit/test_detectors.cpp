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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "detectors.hpp"
#include "error.hpp"
#include "test_util.hpp"

using namespace shiftbench;

namespace {

DatasetBundle logits_bundle(std::size_t rows, std::size_t cols, std::vector<float> v,
                            Role role = Role::kTestId) {
  DatasetBundle b;
  b.name = "logits";
  b.role = role;
  b.logits = LogitMatrix(rows, cols, std::move(v));
  return b;
}

DatasetBundle train_bundle(std::size_t rows, std::size_t dim, std::vector<float> feats,
                           std::vector<std::int32_t> labels) {
  DatasetBundle b;
  b.name = "train";
  b.role = Role::kTrainId;
  b.features = FeatureMatrix(rows, dim, std::move(feats));
  b.labels = LabelVector(std::move(labels));
  return b;
}

LinearHead identity_head(std::size_t d) {
  Matrix w(d, d);
  for (std::size_t i = 0; i < d; ++i) w(i, i) = 1.0f;
  return LinearHead{w, std::vector<float>(d, 0.0f)};
}

// Random bundle with a head and logits recomputed from it in float.
DatasetBundle random_bundle(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t c,
                            Role role, bool relu = true) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  DatasetBundle b;
  b.name = "rand";
  b.role = role;
  std::vector<float> f(n * d), w(c * d), bias(c);
  for (auto& v : f) v = relu ? std::max(0.0f, g(rng)) : g(rng);
  for (auto& v : w) v = g(rng);
  for (auto& v : bias) v = 0.1f * g(rng);
  b.features = FeatureMatrix(n, d, f);
  b.head = LinearHead{Matrix(c, d, w), bias};
  std::vector<float> l(n * c);
  std::vector<double> z(d), out(c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[j] = f[i * d + j];
    b.head->apply(z, out);
    for (std::size_t k = 0; k < c; ++k) l[i * c + k] = static_cast<float>(out[k]);
  }
  b.logits = LogitMatrix(n, c, l);
  std::vector<std::int32_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::int32_t>(i % c);
  b.labels = LabelVector(y);
  return b;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInternal;
}

DetectorConfig cfg(DetectorKind kind) {
  DetectorConfig c;
  c.kind = kind;
  return c;
}

}  // namespace

TEST_CASE("logit scores on analytic inputs") {
  auto data = logits_bundle(1, 2, {0, 0});
  CHECK(FittedDetector::logit_only(DetectorKind::kMsp).score(data).values[0] == 0.5);
  CHECK(FittedDetector::logit_only(DetectorKind::kEnergy, 1.0).score(data).values[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(FittedDetector::logit_only(DetectorKind::kMaxLogit).score(data).values[0] == 0.0);

  std::vector<double> l{1.0, 3.0, -2.0};
  double denom = std::exp(1.0) + std::exp(3.0) + std::exp(-2.0);
  CHECK(scoring::max_softmax(l, 1.0) == doctest::Approx(std::exp(3.0) / denom).epsilon(1e-14));
  CHECK(scoring::logsumexp(l) == doctest::Approx(std::log(denom)).epsilon(1e-14));
  double t = 4.0;
  double denom_t = std::exp(0.25) + std::exp(0.75) + std::exp(-0.5);
  CHECK(scoring::energy(l, t) == doctest::Approx(t * std::log(denom_t)).epsilon(1e-14));
  CHECK(scoring::max_softmax(l, t) == doctest::Approx(std::exp(0.75) / denom_t).epsilon(1e-14));
  // Overflow safety.
  std::vector<double> big{1000.0, 1000.0};
  CHECK(scoring::logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("logit score invariants") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t c = 2 + rep % 9;
    std::vector<double> l(c), shifted(c);
    double k = g(rng);
    for (std::size_t i = 0; i < c; ++i) {
      l[i] = g(rng);
      shifted[i] = l[i] + k;
    }
    double e = scoring::energy(l, 1.0);
    double m = scoring::max_logit(l);
    CHECK(e == scoring::logsumexp(l));
    CHECK(e >= m);
    CHECK(e <= m + std::log(static_cast<double>(c)) + 1e-12);
    CHECK(scoring::max_softmax(shifted, 1.0) == doctest::Approx(scoring::max_softmax(l, 1.0)).epsilon(1e-12));
    CHECK(scoring::max_softmax(shifted, 1000.0) ==
          doctest::Approx(scoring::max_softmax(l, 1000.0)).epsilon(1e-12));
    CHECK(scoring::energy(shifted, 1.0) == doctest::Approx(e + k).epsilon(1e-12));
    CHECK(scoring::max_logit(shifted) == doctest::Approx(m + k).epsilon(1e-12));
  }
}

TEST_CASE("threshold is inclusive") {
  ScoreVector s{DetectorKind::kMsp, {1, 2, 3}};
  CHECK(threshold(s, 2.0) == std::vector<bool>{false, true, true});
  CHECK(threshold(s, -std::numeric_limits<double>::infinity()) == std::vector<bool>{true, true, true});
  CHECK(threshold(s, std::numeric_limits<double>::infinity()) == std::vector<bool>{false, false, false});
}

TEST_CASE("mahalanobis") {
  SUBCASE("zero scatter falls back to the ridge") {
    auto train = train_bundle(4, 2, {0, 0, 0, 0, 4, 0, 4, 0}, {0, 0, 1, 1});
    auto c = cfg(DetectorKind::kMahalanobis);
    c.ridge_scale = 1.0;
    auto det = fit(c, train);
    auto* s = det.state_as<MahalanobisState>();
    REQUIRE(s != nullptr);
    CHECK(s->ridge == 1.0);
    CHECK(s->means(0, 0) == 0.0);
    CHECK(s->means(1, 0) == 4.0);
    CHECK(s->precision.isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-15));
    DatasetBundle q;
    q.role = Role::kTestId;
    q.features = FeatureMatrix(1, 2, {3, 4});
    CHECK(det.score(q).values[0] == doctest::Approx(-17.0).epsilon(1e-14));
  }
  SUBCASE("single mean with identity precision") {
    RowMatrix means(1, 2);
    means << 0, 0;
    auto det = FittedDetector::mahalanobis({0}, means, Eigen::MatrixXd::Identity(2, 2), 0.0);
    CHECK(det.score_row(std::vector<double>{3, 4}, {}) == doctest::Approx(-25.0).epsilon(1e-14));
    CHECK(det.score_row(std::vector<double>{0, 0}, {}) == 0.0);
  }
  SUBCASE("matches a direct covariance inverse") {
    std::mt19937_64 rng(11);
    auto train = random_bundle(rng, 300, 6, 3, Role::kTrainId, false);
    auto c = cfg(DetectorKind::kMahalanobis);
    auto det = fit(c, train);
    // Oracle: per-class means, pooled covariance, ridge, explicit inverse.
    Eigen::MatrixXd x(300, 6);
    for (int i = 0; i < 300; ++i)
      for (int j = 0; j < 6; ++j) x(i, j) = (*train.features)(i, j);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(3, 6);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 300; ++i) {
      mu.row(i % 3) += x.row(i);
      counts[i % 3] += 1;
    }
    for (int k = 0; k < 3; ++k) mu.row(k) /= counts[k];
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 300; ++i) {
      Eigen::VectorXd r = (x.row(i) - mu.row(i % 3)).transpose();
      cov += r * r.transpose();
    }
    cov /= 300.0;
    cov.diagonal().array() += 1e-6 * cov.trace() / 6.0;
    Eigen::MatrixXd p = cov.inverse();
    CHECK(det.state_as<MahalanobisState>()->precision.isApprox(p, 1e-10));
    auto scores = det.score(train);
    for (int i = 0; i < 300; i += 17) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd r = (x.row(i) - mu.row(k)).transpose();
        best = std::min(best, r.dot(p * r));
      }
      CHECK(scores.values[static_cast<std::size_t>(i)] == doctest::Approx(-best).epsilon(1e-10));
      CHECK(scores.values[static_cast<std::size_t>(i)] <= 0.0);
    }
    auto& prec = det.state_as<MahalanobisState>()->precision;
    CHECK((prec - prec.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("singular covariance without ridge") {
    auto train = train_bundle(4, 2, {0, 0, 1, 0, 4, 0, 5, 0}, {0, 0, 1, 1});
    auto c = cfg(DetectorKind::kMahalanobis);
    c.ridge_scale = 0.0;
    CHECK(code_of([&] { fit(c, train); }) == ErrorCode::kNumerical);
  }
}

TEST_CASE("knn") {
  RowMatrix bank(2, 2);
  bank << 1, 0, 0, 1;
  DatasetBundle q;
  q.role = Role::kTestId;
  q.features = FeatureMatrix(1, 2, {0, 1});
  CHECK(FittedDetector::knn(bank, 1).score(q).values[0] == 0.0);
  CHECK(FittedDetector::knn(bank, 2).score(q).values[0] ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));

  SUBCASE("query scale does not matter and the bank order is irrelevant") {
    std::mt19937_64 rng(3);
    auto train = random_bundle(rng, 50, 5, 2, Role::kTrainId, false);
    auto c = cfg(DetectorKind::kKnn);
    c.k = 4;
    auto det = fit(c, train);
    auto test = random_bundle(rng, 20, 5, 2, Role::kTestId, false);
    auto s1 = det.score(test);

    DatasetBundle rev = train;
    std::vector<float> f(train.features->data().begin(), train.features->data().end());
    std::vector<float> r(f.size());
    for (std::size_t i = 0; i < 50; ++i)
      std::copy_n(f.begin() + static_cast<long>((49 - i) * 5), 5, r.begin() + static_cast<long>(i * 5));
    rev.features = FeatureMatrix(50, 5, r);
    auto s2 = fit(c, rev).score(test);
    CHECK(s1.values == s2.values);

    DatasetBundle scaled = test;
    for (float& v : scaled.features->data()) v *= 4.0f;
    auto s3 = det.score(scaled);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(s3.values[i] == doctest::Approx(s1.values[i]).epsilon(1e-6));
      CHECK(s1.values[i] <= 0.0);
    }
  }
  SUBCASE("default k") {
    std::mt19937_64 rng(5);
    auto train = random_bundle(rng, 95, 3, 2, Role::kTrainId);
    CHECK(*fit(cfg(DetectorKind::kKnn), train).config().k == 9);
    auto c = cfg(DetectorKind::kKnn);
    c.k = 96;
    CHECK(code_of([&] { fit(c, train); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("ash-b shaping") {
  auto shaped = scoring::ash_b_shape(std::vector<double>{4, 2, 0, 0}, 50.0);
  CHECK(shaped == std::vector<double>{3, 3, 0, 0});
  auto det = FittedDetector::ash_b(identity_head(4), 50.0);
  DatasetBundle q;
  q.role = Role::kTestId;
  q.features = FeatureMatrix(1, 4, {4, 2, 0, 0});
  const double expected = std::log(2.0 * std::exp(3.0) + 2.0);
  CHECK(det.score(q).values[0] == doctest::Approx(expected).epsilon(1e-14));

  CHECK(scoring::ash_b_keep_count(10, 65.0) == 7);
  CHECK(scoring::ash_b_keep_count(4, 50.0) == 2);
  CHECK(scoring::ash_b_keep_count(3, 1.0) == 1);
  CHECK(scoring::ash_b_keep_count(3, 100.0) == 3);
  // Ties keep the lower index.
  CHECK(scoring::ash_b_shape(std::vector<double>{1, 1, 1, 1}, 50.0) ==
        std::vector<double>{2, 2, 0, 0});
}

TEST_CASE("react") {
  std::mt19937_64 rng(9);
  auto train = random_bundle(rng, 40, 6, 3, Role::kTrainId);
  auto c = cfg(DetectorKind::kReact);
  c.clip_percentile = 100.0;
  auto det = fit(c, train);
  float mx = *std::max_element(train.features->data().begin(), train.features->data().end());
  CHECK(det.state_as<ReactState>()->clip_value == static_cast<double>(mx));

  std::vector<double> v{5, 1, 3, 2, 4};
  CHECK(scoring::percentile(v, 50.0) == 3.0);
  CHECK(scoring::percentile(v, 90.0) == doctest::Approx(4.6));
  CHECK(scoring::percentile(v, 0.0) == 1.0);

  auto inf = FittedDetector::react(*train.head, std::numeric_limits<double>::infinity());
  auto energy = FittedDetector::logit_only(DetectorKind::kEnergy, 1.0);
  auto test = random_bundle(rng, 30, 6, 3, Role::kTestId);
  test.head = train.head;
  // Logits recomputed from the features with the same head.
  std::vector<float> l(30 * 3);
  std::vector<double> z(6), out(3);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 6; ++j) z[j] = (*test.features)(i, j);
    train.head->apply(z, out);
    for (std::size_t k = 0; k < 3; ++k) l[i * 3 + k] = static_cast<float>(out[k]);
  }
  test.logits = LogitMatrix(30, 3, l);
  auto a = inf.score(test).values;
  // Same quantity computed from double-precision head outputs.
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 6; ++j) z[j] = (*test.features)(i, j);
    train.head->apply(z, out);
    CHECK(a[i] == scoring::energy(out, 1.0));
  }
}

TEST_CASE("vim") {
  SUBCASE("alpha is the ratio of mean max logit to mean residual norm") {
    auto train = train_bundle(2, 2, {2, 5, 2, -5}, {0, 0});
    train.head = LinearHead{Matrix(2, 2, {5, 0, -5, 0}), {0, 0}};
    auto c = cfg(DetectorKind::kVim);
    c.principal_dim = 1;
    auto det = fit(c, train);
    auto* s = det.state_as<VimState>();
    CHECK(s->alpha == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s->offset.norm() == doctest::Approx(0.0));
    // z = (2, 0): logits (10, -10), residual 2 -> lse(10, -10) - 10.
    double got = det.score_row(std::vector<double>{2, 0}, {});
    CHECK(got == doctest::Approx(std::log(std::exp(10.0) + std::exp(-10.0)) - 10.0).epsilon(1e-12));
  }
  SUBCASE("residual basis is orthonormal and principal_dim = D is energy") {
    std::mt19937_64 rng(21);
    auto train = random_bundle(rng, 200, 8, 4, Role::kTrainId);
    auto c = cfg(DetectorKind::kVim);
    c.principal_dim = 3;
    auto det = fit(c, train);
    auto& r = det.state_as<VimState>()->residual_basis;
    CHECK(r.cols() == 5);
    CHECK((r.transpose() * r - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-9);

    c.principal_dim = 8;
    auto full = fit(c, train);
    auto test = random_bundle(rng, 50, 8, 4, Role::kTestId);
    test.head = train.head;
    auto s = full.score(test).values;
    std::vector<double> z(8), out(4);
    for (std::size_t i = 0; i < 50; ++i) {
      for (std::size_t j = 0; j < 8; ++j) z[j] = (*test.features)(i, j);
      train.head->apply(z, out);
      CHECK(std::abs(s[i] - scoring::energy(out, 1.0)) <= 1e-9);
    }
    c.principal_dim = 9;
    CHECK(code_of([&] { fit(c, train); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("max cosine") {
  LinearHead h{Matrix(2, 2, {1, 0, 1, 1}), {5, 5}};
  auto det = FittedDetector::max_cosine(h);
  CHECK(det.score_row(std::vector<double>{0, 3}, {}) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(det.score_row(std::vector<double>{2, 0}, {}) == doctest::Approx(1.0));
  CHECK(det.score_row(std::vector<double>{0, 0}, {}) == 0.0);
}

TEST_CASE("odin with T = 1 equals msp bitwise") {
  std::mt19937_64 rng(1);
  auto test = random_bundle(rng, 100, 4, 5, Role::kTestId);
  auto odin = FittedDetector::logit_only(DetectorKind::kOdinTemp, 1.0).score(test).values;
  auto msp = FittedDetector::logit_only(DetectorKind::kMsp).score(test).values;
  CHECK(odin == msp);
}

TEST_CASE("config validation and specs") {
  auto c = cfg(DetectorKind::kMsp);
  c.k = 3;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_detector_spec("nope"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_detector_spec("knn:k=abc"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_detector_spec("knn:temperature=2"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_detector_spec("ash_b:keep_percent=0"); }) == ErrorCode::kConfig);
  auto parsed = parse_detector_spec("odin_temp:temperature=1000,name=odin");
  CHECK(parsed.kind == DetectorKind::kOdinTemp);
  CHECK(*parsed.temperature == 1000.0);
  CHECK(parsed.label() == "odin");
  CHECK(detector_spec(parsed) == "odin_temp:name=odin,temperature=1000");
  CHECK(detector_spec(parse_detector_spec(detector_spec(parsed))) == detector_spec(parsed));
  CHECK(*fit(cfg(DetectorKind::kOdinTemp), logits_bundle(1, 2, {0, 0}, Role::kTrainId))
             .config()
             .temperature == 1000.0);
}

TEST_CASE("fit prerequisites") {
  auto logits_only = logits_bundle(2, 2, {0, 1, 1, 0}, Role::kTrainId);
  logits_only.labels = LabelVector({1, 0});
  CHECK(code_of([&] { fit(cfg(DetectorKind::kKnn), logits_only); }) == ErrorCode::kMissingInput);
  CHECK(code_of([&] { fit(cfg(DetectorKind::kMsp), logits_bundle(1, 2, {0, 0})); }) ==
        ErrorCode::kInvalidArgument);
  std::mt19937_64 rng(2);
  auto train = random_bundle(rng, 10, 3, 2, Role::kTrainId);
  auto det = fit(cfg(DetectorKind::kMahalanobis), train);
  DatasetBundle wrong;
  wrong.role = Role::kTestId;
  wrong.features = FeatureMatrix(2, 4);
  CHECK(code_of([&] { det.score(wrong); }) == ErrorCode::kShape);
}

TEST_CASE("fitted detectors survive a save and load") {
  sbtest::TempDir tmp;
  std::mt19937_64 rng(13);
  auto train = random_bundle(rng, 60, 6, 3, Role::kTrainId);
  auto test = random_bundle(rng, 25, 6, 3, Role::kTestId);
  test.head = train.head;
  std::vector<std::string> specs{"msp", "max_logit", "energy:temperature=2", "odin_temp",
                                 "mahalanobis", "knn:k=5", "vim:principal_dim=2",
                                 "react:clip_percentile=80", "ash_b", "max_cosine"};
  for (const auto& spec : specs) {
    auto det = fit(parse_detector_spec(spec), train);
    auto dir = tmp / ("d_" + std::to_string(&spec - specs.data()));
    save_detector(det, dir);
    auto back = load_detector(dir);
    CHECK_MESSAGE(back.kind() == det.kind(), spec);
    CHECK_MESSAGE(back.score(test).values == det.score(test).values, spec);
  }
  auto unbounded = FittedDetector::react(*train.head, std::numeric_limits<double>::infinity());
  save_detector(unbounded, tmp / "inf");
  CHECK(std::isinf(load_detector(tmp / "inf").state_as<ReactState>()->clip_value));
}

TEST_CASE("score_all") {
  std::mt19937_64 rng(17);
  auto train = random_bundle(rng, 30, 4, 2, Role::kTrainId);
  auto a = random_bundle(rng, 10, 4, 2, Role::kTestId);
  a.name = "a";
  DatasetBundle b;
  b.name = "logits_only";
  b.role = Role::kSemanticShift;
  b.logits = a.logits;
  std::vector<DetectorConfig> configs{cfg(DetectorKind::kMsp), cfg(DetectorKind::kKnn)};
  std::vector<DatasetBundle> sets{a, b};
  auto table = score_all(configs, train, sets, 1);
  CHECK(table.cells.size() == 4);
  const auto* bad = table.find("knn", "logits_only");
  REQUIRE(bad != nullptr);
  CHECK_FALSE(bad->scores.has_value());
  CHECK(bad->error.find("missing features") != std::string::npos);
  CHECK(table.find("msp", "logits_only")->scores.has_value());

  std::vector<DatasetBundle> twice{a, a};
  auto t2 = score_all(configs, train, twice, 3);
  CHECK(t2.cells[0].scores->values == t2.cells[1].scores->values);
  auto t1 = score_all(configs, train, twice, 1);
  for (std::size_t i = 0; i < t1.cells.size(); ++i)
    CHECK(t1.cells[i].scores->values == t2.cells[i].scores->values);
}
