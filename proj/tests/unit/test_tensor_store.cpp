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

#include <cmath>
#include <cstring>
#include <functional>
#include <fstream>
#include <limits>

#include "error.hpp"
#include "npy.hpp"
#include "tensor_store.hpp"
#include "test_util.hpp"

using namespace shiftbench;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInternal;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::vector<std::byte> bytes_of(const std::filesystem::path& p) { return npy::read_file(p); }

}  // namespace

TEST_CASE("npy decode reads numpy-written files") {
  auto m = load_matrix(sbtest::fixture("f4_2x3.npy"));
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == 1.5f);
  CHECK(m(0, 1) == -2.0f);
  CHECK(m(1, 1) == 1e38f);
  CHECK(m(1, 2) == -0.125f);

  auto labels = load_labels(sbtest::fixture("i4_4.npy"));
  CHECK(std::vector<std::int32_t>(labels.values().begin(), labels.values().end()) ==
        std::vector<std::int32_t>{0, 2, -1, 7});

  auto f8 = npy::to_f64(npy::read(sbtest::fixture("f8_3.npy")));
  CHECK(f8 == std::vector<double>{0.1, -2.5, 1e300});
}

TEST_CASE("npy encode matches numpy byte for byte") {
  sbtest::TempDir tmp;
  for (const char* name : {"f4_2x3.npy", "i4_4.npy", "f8_3.npy", "f4_0x5.npy"}) {
    auto original = bytes_of(sbtest::fixture(name));
    auto array = npy::decode(original);
    CHECK_MESSAGE(npy::encode(array) == original, name);
  }
  auto m = load_matrix(sbtest::fixture("f4_2x3.npy"));
  save_matrix(m, tmp / "copy.npy");
  CHECK(bytes_of(tmp / "copy.npy") == bytes_of(sbtest::fixture("f4_2x3.npy")));
}

TEST_CASE("matrix round trips") {
  sbtest::TempDir tmp;
  SUBCASE("zeros") {
    save_matrix(Matrix(2, 3), tmp / "z.npy");
    auto m = load_matrix(tmp / "z.npy");
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    for (float v : m.data()) CHECK(v == 0.0f);
  }
  SUBCASE("single value") {
    save_matrix(Matrix(1, 1, {3.5f}), tmp / "one.npy");
    CHECK(load_matrix(tmp / "one.npy")(0, 0) == 3.5f);
    // 128-byte header for a (1, 1) array, then the payload.
    CHECK(bytes_of(tmp / "one.npy").size() == 132);
  }
  SUBCASE("empty") {
    save_matrix(Matrix(0, 5), tmp / "e.npy");
    auto m = load_matrix(tmp / "e.npy");
    CHECK(m.rows() == 0);
    CHECK(m.cols() == 5);
  }
  SUBCASE("extreme finite values are bit exact") {
    std::vector<float> v{1e38f, -3.4028235e38f, 1.17549435e-38f, 1e-45f};
    save_matrix(Matrix(2, 2, v), tmp / "x.npy");
    auto m = load_matrix(tmp / "x.npy");
    CHECK(std::memcmp(m.data().data(), v.data(), v.size() * sizeof(float)) == 0);
    auto before = bytes_of(tmp / "x.npy");
    save_matrix(m, tmp / "y.npy");
    CHECK(bytes_of(tmp / "y.npy") == before);
  }
}

TEST_CASE("npy rejects malformed input") {
  sbtest::TempDir tmp;
  auto good = bytes_of(sbtest::fixture("f4_2x3.npy"));

  SUBCASE("payload shorter than the header claims") {
    auto arr = npy::from_f32({2, 2}, std::vector<float>{1, 2, 3, 4});
    auto bytes = npy::encode(arr);
    bytes.resize(bytes.size() - 4);  // 3 payload values for a 2x2 header
    npy::write_file_atomic(tmp / "short.npy", bytes);
    CHECK(code_of([&] { load_matrix(tmp / "short.npy"); }) == ErrorCode::kFormat);
  }
  SUBCASE("trailing bytes") {
    auto bytes = good;
    bytes.push_back(std::byte{0});
    CHECK(code_of([&] { npy::decode(bytes); }) == ErrorCode::kFormat);
  }
  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[1] = std::byte{'X'};
    CHECK(code_of([&] { npy::decode(bytes); }) == ErrorCode::kFormat);
  }
  SUBCASE("fortran order") {
    std::string text(reinterpret_cast<const char*>(good.data()), good.size());
    auto pos = text.find("False");
    text.replace(pos, 5, "True ");
    std::vector<std::byte> bytes(reinterpret_cast<const std::byte*>(text.data()),
                                 reinterpret_cast<const std::byte*>(text.data()) + text.size());
    CHECK(code_of([&] { npy::decode(bytes); }) == ErrorCode::kFormat);
  }
  SUBCASE("wrong dtype for a matrix") {
    CHECK(code_of([&] { load_matrix(sbtest::fixture("f8_3.npy")); }) == ErrorCode::kFormat);
    CHECK(code_of([&] { load_labels(sbtest::fixture("f4_2x3.npy")); }) == ErrorCode::kFormat);
  }
  SUBCASE("non-finite values name their position") {
    Matrix m(2, 2, {0.0f, 1.0f, std::numeric_limits<float>::quiet_NaN(), 2.0f});
    npy::write(tmp / "nan.npy", npy::from_f32({2, 2}, m.data()));
    try {
      load_matrix(tmp / "nan.npy");
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kValidation);
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
      CHECK(std::string(e.what()).find("col 0") != std::string::npos);
    }
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { load_matrix(tmp / "absent.npy"); }) == ErrorCode::kIo);
  }
}

TEST_CASE("predictions take the lowest index on ties") {
  CHECK(predictions(LogitMatrix(1, 2, {0.1f, 0.9f})) == std::vector<std::int32_t>{1});
  CHECK(predictions(LogitMatrix(1, 2, {0.5f, 0.5f})) == std::vector<std::int32_t>{0});
  CHECK(predictions(LogitMatrix(3, 2, {1, 0, 0, 1, 2, 2})) == std::vector<std::int32_t>{0, 1, 0});
  // Shifting a row by a constant leaves its argmax alone.
  LogitMatrix shifted(3, 2, {1 + 7.f, 0 + 7.f, 0 - 3.f, 1 - 3.f, 2 + 0.5f, 2 + 0.5f});
  CHECK(predictions(shifted) == std::vector<std::int32_t>{0, 1, 0});
}

TEST_CASE("bundle manifests") {
  sbtest::TempDir tmp;
  save_matrix(Matrix(10, 8), tmp / "f.npy");
  save_matrix(Matrix(9, 5), tmp / "l9.npy");
  save_matrix(Matrix(10, 5), tmp / "l10.npy");
  save_labels(LabelVector(std::vector<std::int32_t>(10, 1)), tmp / "y.npy");
  save_labels(LabelVector(std::vector<std::int32_t>(10, -1)), tmp / "none.npy");

  SUBCASE("semantic shift without labels is valid") {
    write_text(tmp / "m.json", R"({"name":"ood","role":"semantic_shift","features":"f.npy"})");
    auto b = load_bundle(tmp / "m.json");
    CHECK(b.role == Role::kSemanticShift);
    CHECK(b.rows() == 10);
    CHECK_FALSE(b.labels.has_value());
  }
  SUBCASE("semantic shift with only NO_LABEL is valid") {
    write_text(tmp / "m.json",
               R"({"name":"ood","role":"semantic_shift","logits":"l10.npy","labels":"none.npy"})");
    CHECK_NOTHROW(load_bundle(tmp / "m.json"));
  }
  SUBCASE("semantic shift with class labels is rejected") {
    write_text(tmp / "m.json",
               R"({"name":"ood","role":"semantic_shift","logits":"l10.npy","labels":"y.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kManifest);
  }
  SUBCASE("train_id without labels") {
    write_text(tmp / "m.json", R"({"name":"tr","role":"train_id","features":"f.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kManifest);
  }
  SUBCASE("row-count mismatch") {
    write_text(tmp / "m.json",
               R"({"name":"x","role":"covariate_shift","features":"f.npy","logits":"l9.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kConsistency);
  }
  SUBCASE("unknown keys are rejected") {
    write_text(tmp / "m.json", R"({"name":"x","role":"test_id","feature":"f.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kManifest);
  }
  SUBCASE("unknown role") {
    write_text(tmp / "m.json", R"({"name":"x","role":"ood","features":"f.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kManifest);
  }
  SUBCASE("label outside the class range") {
    save_labels(LabelVector(std::vector<std::int32_t>(10, 5)), tmp / "y5.npy");
    write_text(tmp / "m.json",
               R"({"name":"x","role":"test_id","logits":"l10.npy","labels":"y5.npy"})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kConsistency);
  }
  SUBCASE("head dimension mismatch") {
    save_matrix(Matrix(5, 7), tmp / "w.npy");
    save_vector(std::vector<float>(5, 0.0f), tmp / "b.npy");
    write_text(tmp / "m.json",
               R"({"name":"x","role":"test_id","features":"f.npy","labels":"y.npy",)"
               R"("head":{"weights":"w.npy","bias":"b.npy"}})");
    CHECK(code_of([&] { load_bundle(tmp / "m.json"); }) == ErrorCode::kConsistency);
  }
  SUBCASE("save and reload") {
    DatasetBundle b;
    b.name = "train";
    b.role = Role::kTrainId;
    b.features = FeatureMatrix(2, 2, {1, 2, 3, 4});
    b.logits = LogitMatrix(2, 2, {0.5f, -1, 2, 0});
    b.labels = LabelVector({0, 1});
    b.head = LinearHead{Matrix(2, 2, {1, 0, 0, 1}), {0.25f, -0.25f}};
    save_bundle(b, tmp / "train.json");
    auto r = load_bundle(tmp / "train.json");
    CHECK(r.name == "train");
    CHECK(r.role == Role::kTrainId);
    CHECK(std::vector<float>(r.features->data().begin(), r.features->data().end()) ==
          std::vector<float>{1, 2, 3, 4});
    CHECK(r.head->bias == std::vector<float>{0.25f, -0.25f});
    CHECK(std::filesystem::exists(tmp / "train.features.npy"));
  }
}

TEST_CASE("head reconstruction error") {
  LinearHead h{Matrix(2, 2, {1, 2, 3, 4}), {1, -1}};
  FeatureMatrix z(1, 2, {1, 1});
  CHECK(head_reconstruction_error(h, z, LogitMatrix(1, 2, {4, 6})) == 0.0);
  CHECK(head_reconstruction_error(h, z, LogitMatrix(1, 2, {4, 6.5f})) == doctest::Approx(0.5));
}
