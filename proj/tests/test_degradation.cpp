// Copyright 2026 The tradeoff-sr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "tsr/degradation.hpp"

using namespace tsr;
using namespace tsr::degradation;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

DegradationSpec clean_spec(int scale) {
  DegradationSpec s;
  s.blur_sigma_range = {0.0, 0.0};
  s.noise_sigma_range = {0.0, 0.0};
  s.scale = scale;
  return s;
}

fs::path corpus_dir() {
  const fs::path dir = fs::temp_directory_path() / "tsr_test_corpus";
  if (!fs::exists(dir / "toy_0000.png")) make_toy_corpus(dir, 3, 48, 11);
  return dir;
}

}  // namespace

TEST_CASE("gaussian kernel: delta at sigma 0, unit sum, direct formula") {
  const Kernel2D d = gaussian_kernel(0.0, 3);
  CHECK(d.weights == std::vector<double>{0, 0, 0, 0, 1, 0, 0, 0, 0});

  for (double sigma : {0.1, 0.5, 1.0, 2.7, 10.0}) {
    const Kernel2D k = gaussian_kernel(sigma, 7);
    double sum = 0.0;
    for (double v : k.weights) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  double total = 0.0;
  for (int y = -2; y <= 2; ++y)
    for (int x = -2; x <= 2; ++x) total += std::exp(-(x * x + y * y) / 2.0);
  CHECK(gaussian_kernel(1.0, 5).at(2, 2) == doctest::Approx(1.0 / total).epsilon(1e-14));

  CHECK(code_of([] { gaussian_kernel(1.0, 4); }) == ErrorCode::EvenSize);
}

TEST_CASE("identity degradation returns the input exactly") {
  Rng rng(1);
  const ImageTensor hr = testing::random_tensor(rng, {3, 12, 8});
  Rng r2(2);
  CHECK(degrade(hr, clean_spec(1), r2).lr == hr);
}

TEST_CASE("constant image stays constant under any blur and zero noise") {
  DegradationSpec spec;
  spec.noise_sigma_range = {0.0, 0.0};
  spec.blur_sigma_range = {0.3, 3.0};
  const ImageTensor hr = Tensor::filled(3, 32, 24, 0.6180339);
  for (int i = 0; i < 5; ++i) {
    Rng rng(10 + i);
    const Degraded d = degrade(hr, spec, rng);
    CHECK(d.lr.shape() == Shape{3, 8, 6});
    for (double v : d.lr.values()) CHECK(v == 0.6180339);
  }
}

TEST_CASE("noise of sigma 0.1 on a zero image has the right empirical spread") {
  DegradationSpec spec = clean_spec(1);
  spec.noise_sigma_range = {0.1, 0.1};
  Rng rng(3);
  const Degraded d = degrade(Tensor::zeros(1, 100, 100), spec, rng);
  double ss = 0.0, s = 0.0;
  for (double v : d.unclamped.values()) {
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(d.unclamped.size());
  const double stddev = std::sqrt(ss / n - (s / n) * (s / n));
  MESSAGE("empirical noise std " << stddev);
  CHECK(stddev >= 0.097);
  CHECK(stddev <= 0.103);
  for (double v : d.lr.values()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("degradation is deterministic for a seed") {
  Rng rng(4);
  const ImageTensor hr = testing::random_tensor(rng, {3, 16, 16});
  DegradationSpec spec;
  Rng a(99), b(99);
  const Degraded da = degrade(hr, spec, a), db = degrade(hr, spec, b);
  CHECK(da.lr == db.lr);
  CHECK(da.sample.blur_sigma == db.sample.blur_sigma);
  CHECK(da.sample.noise_sigma == db.sample.noise_sigma);
}

TEST_CASE("zero-noise degradation keeps the mean of a periodic image") {
  // One full cosine period per axis; borders are where the mean can drift.
  const int n = 64;
  ImageTensor hr(Shape{1, n, n});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      hr.at(0, y, x) = 0.5 + 0.2 * std::cos(2.0 * std::numbers::pi * (x + 0.5) / n) *
                                 std::cos(2.0 * std::numbers::pi * (y + 0.5) / n);
  DegradationSpec spec;
  spec.noise_sigma_range = {0.0, 0.0};
  spec.blur_sigma_range = {1.0, 1.0};
  Rng rng(5);
  const Degraded d = degrade(hr, spec, rng);
  const double blurred_mean = mean(convolve_clamped(hr, d.sample.kernel));
  MESSAGE("mean drift " << std::abs(mean(d.unclamped) - blurred_mean));
  CHECK(std::abs(mean(d.unclamped) - blurred_mean) < 1e-6);
}

TEST_CASE("operator adjoint satisfies the inner-product identity") {
  Rng rng(6);
  for (int scale : {1, 2, 4}) {
    const Kernel2D k = gaussian_kernel(0.9, 5);
    const Tensor x = testing::normal_tensor(rng, {2, 16, 12});
    const Tensor ax = apply_operator(x, k, scale);
    const Tensor r = testing::normal_tensor(rng, ax.shape());
    CHECK(dot(ax, r) == doctest::Approx(dot(x, apply_operator_adjoint(r, k, scale, 16, 12))).epsilon(1e-12));
  }
}

TEST_CASE("degradation rejects indivisible shapes and bad specs") {
  DegradationSpec spec;
  Rng rng(7);
  CHECK(code_of([&] { degrade(Tensor::zeros(3, 10, 12), spec, rng); }) == ErrorCode::ShapeNotDivisible);
  spec.kernel_size = 4;
  CHECK(code_of([&] { spec.validate(); }) == ErrorCode::ValidationError);
  spec = DegradationSpec{};
  spec.blur_sigma_range = {1.0, 0.5};
  CHECK(code_of([&] { spec.validate(); }) == ErrorCode::ValidationError);
}

TEST_CASE("synthetic dataset is deterministic and shaped by the scale") {
  DegradationSpec spec;
  imaging::PatchSpec patch;
  patch.size = 16;
  patch.stride = 16;
  CHECK(synth_dataset(corpus_dir(), spec, patch, 0).empty());
  const auto a = synth_dataset(corpus_dir(), spec, patch, 20);
  const auto b = synth_dataset(corpus_dir(), spec, patch, 20);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lr == b[i].lr);
    CHECK(a[i].gt == b[i].gt);
    CHECK(a[i].gt.shape() == Shape{3, 16, 16});
    CHECK(a[i].lr.shape() == Shape{3, 4, 4});
  }
  spec.seed = 1;
  const auto c = synth_dataset(corpus_dir(), spec, patch, 20);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || !(a[i].lr == c[i].lr);
  CHECK(differs);
}

TEST_CASE("synthetic dataset errors") {
  const fs::path empty = fs::temp_directory_path() / "tsr_test_empty_corpus";
  fs::create_directories(empty);
  DegradationSpec spec;
  imaging::PatchSpec patch;
  CHECK(code_of([&] { synth_dataset(empty, spec, patch, 4); }) == ErrorCode::EmptyCorpus);
  patch.size = 18;
  CHECK(code_of([&] { synth_dataset(corpus_dir(), spec, patch, 4); }) == ErrorCode::ShapeNotDivisible);
}

TEST_CASE("toy images are deterministic and in range") {
  const ImageTensor a = toy_image(32, 5), b = toy_image(32, 5);
  CHECK(a == b);
  CHECK_FALSE(a == toy_image(32, 6));
  for (double v : a.values()) CHECK((v >= 0.0 && v <= 1.0));
}
