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

#include "doctest.h"
#include "support.hpp"
#include "tsr/eval.hpp"

using namespace tsr;
using namespace tsr::eval;

namespace {

// Direct SSIM: every valid 11x11 window weighted by the outer product of a
// normalized 1-D Gaussian (sigma 1.5).
double reference_ssim(const ImageTensor& a, const ImageTensor& b) {
  double g[11], gs = 0.0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-((i - 5) * (i - 5)) / (2.0 * 1.5 * 1.5));
  for (double& v : g) v /= gs;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y + 11 <= a.height(); ++y)
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = g[i] * g[j], va = a.at(c, y + i, x + j), vb = b.at(c, y + i, x + j);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
  return total / count;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("psnr identity cap and closed forms") {
  Rng rng(1);
  const ImageTensor x = testing::random_tensor(rng, {3, 8, 8}, 0.2, 0.8);
  CHECK(psnr(x, x) == kPsnrCap);
  ImageTensor off = x;
  for (double& v : off.values()) v += 0.1;
  CHECK(psnr(off, x) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(Tensor::zeros(3, 4, 4), Tensor::filled(3, 4, 4, 1.0)) == 0.0);
  CHECK_THROWS_AS(psnr(x, Tensor::zeros(3, 8, 7)), Error);
}

TEST_CASE("ssim identity, symmetry, brute-force agreement, independent noise") {
  Rng rng(2);
  const ImageTensor a = testing::random_tensor(rng, {3, 16, 14});
  ImageTensor b = a;
  for (double& v : b.values()) v = 0.7 * v + 0.1 * uniform01(rng);
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) == ssim(b, a));
  CHECK(ssim(a, b) == doctest::Approx(reference_ssim(a, b)).epsilon(1e-12));
  for (int trial = 0; trial < 10; ++trial) {
    const ImageTensor u = testing::random_tensor(rng, {1, 32, 32});
    const ImageTensor v = testing::random_tensor(rng, {1, 32, 32});
    CHECK(std::abs(ssim(u, v)) < 0.1);
  }
  CHECK(code_of([&] { ssim(Tensor::zeros(1, 10, 20), Tensor::zeros(1, 10, 20)); }) == ErrorCode::TooSmall);
}

TEST_CASE("Frechet distance closed forms") {
  Rng rng(3);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 64; ++i) {
    std::vector<double> v(4);
    fill_normal(rng, v);
    a.push_back(v);
    for (double& x : v) x += 0.5;  // same covariance, mean gap (0.5,...,0.5)
    b.push_back(v);
  }
  CHECK(frechet_distance(a, b) == doctest::Approx(4 * 0.25).epsilon(1e-9));
  CHECK(frechet_distance(a, a) < 1e-9);

  // 1-D: (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2 with sample variances.
  std::vector<std::vector<double>> p{{1.0}, {2.0}, {3.0}}, q{{0.0}, {4.0}, {8.0}, {12.0}};
  const double var_p = 1.0, var_q = 80.0 / 3.0, dmu = 2.0 - 6.0;
  const double want = dmu * dmu + std::pow(std::sqrt(var_p) - std::sqrt(var_q), 2);
  CHECK(frechet_distance(p, q) == doctest::Approx(want).epsilon(1e-10));
  CHECK(code_of([&] { frechet_distance({}, q); }) == ErrorCode::EmptySet);
}

TEST_CASE("toy_fid identity and symmetry") {
  const losses::PercepExtractor ex;
  Rng rng(4);
  std::vector<ImageTensor> xs, ys;
  for (int i = 0; i < 12; ++i) {
    xs.push_back(testing::random_tensor(rng, {3, 16, 16}));
    ys.push_back(testing::random_tensor(rng, {3, 16, 16}, 0.0, 0.6));
  }
  CHECK(toy_fid(xs, xs, ex) < 1e-6);
  CHECK(std::abs(toy_fid(xs, ys, ex) - toy_fid(ys, xs, ex)) < 1e-6);
  CHECK(toy_fid(xs, ys, ex) > 0.0);
  CHECK(code_of([&] { toy_fid({}, ys, ex); }) == ErrorCode::EmptySet);
}

TEST_CASE("linear blend endpoints, midpoint, affinity") {
  Rng rng(5);
  const ImageTensor f = testing::random_tensor(rng, {3, 6, 5});
  const ImageTensor r = testing::random_tensor(rng, {3, 6, 5});
  CHECK(linear_blend(f, r, 0.0) == r);
  CHECK(linear_blend(f, r, 1.0) == f);
  const ImageTensor gray = linear_blend(Tensor::zeros(3, 2, 2), Tensor::filled(3, 2, 2, 1.0), 0.5);
  for (double v : gray.values()) CHECK(v == 0.5);
  const ImageTensor a = linear_blend(f, r, 0.2), b = linear_blend(f, r, 0.6), m = linear_blend(f, r, 0.4);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK((a.data()[i] + b.data()[i]) / 2 == doctest::Approx(m.data()[i]).epsilon(1e-12));
  CHECK(code_of([&] { linear_blend(f, r, 1.2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("alpha sweep: row count, endpoint rows, variance-averaging oracle") {
  const losses::PercepExtractor ex;
  Rng rng(6);
  std::vector<ImageTensor> xf, xr, gt;
  for (int i = 0; i < 6; ++i) {
    const ImageTensor x = testing::random_tensor(rng, {3, 16, 16}, 0.3, 0.7);
    ImageTensor a = x, b = x;
    std::normal_distribution<double> n(0.0, 0.05);
    for (double& v : a.values()) v += n(rng);
    for (double& v : b.values()) v += n(rng);
    gt.push_back(x);
    xf.push_back(a);
    xr.push_back(b);
  }
  const auto grid = default_alpha_grid();
  const auto rows = sweep_alpha(xf, xr, gt, grid, ex);
  CHECK(rows.size() == grid.size());
  CHECK(rows.front() == measure(0.0, xr, gt, ex));
  CHECK(rows.back() == measure(1.0, xf, gt, ex));
  const auto mid = sweep_alpha(xf, xr, gt, std::vector<double>{0.5}, ex)[0];
  CHECK(mid.psnr > rows.front().psnr);
  CHECK(mid.psnr > rows.back().psnr);
  CHECK(code_of([&] { sweep_alpha(xf, std::span(xr).first(3), gt, grid, ex); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("default grids are six evenly spaced points on [0,1]") {
  CHECK(default_t_grid() == std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  CHECK(default_alpha_grid() == std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
}

TEST_CASE("data-consistency refinement") {
  Rng rng(7);
  SUBCASE("zero iterations is the identity") {
    degradation::DegradationSample s;
    s.kernel = degradation::gaussian_kernel(1.0, 5);
    const ImageTensor x0 = testing::random_tensor(rng, {3, 16, 16});
    const ImageTensor y = testing::random_tensor(rng, {3, 4, 4});
    CHECK(data_consistency_refine(x0, y, s, 4, 0.1, 0) == x0);
  }
  SUBCASE("identity operator contracts as (1 - rho)^k") {
    degradation::DegradationSample s;
    s.kernel = degradation::gaussian_kernel(0.0, 3);
    const ImageTensor x0 = testing::random_tensor(rng, {3, 8, 8});
    const ImageTensor y = testing::random_tensor(rng, {3, 8, 8});
    const double r0 = consistency_residual(x0, y, s, 1);
    for (int k : {1, 5, 10, 20}) {
      const double rk = consistency_residual(data_consistency_refine(x0, y, s, 1, 0.1, k), y, s, 1);
      CHECK(std::abs(rk / r0 - std::pow(0.9, k)) < 1e-6);
    }
    const double r20 = consistency_residual(data_consistency_refine(x0, y, s, 1, 0.5, 20), y, s, 1);
    CHECK(r20 < 1e-3 * r0);
  }
  SUBCASE("blur-downsample operator residual decreases") {
    degradation::DegradationSample s;
    s.kernel = degradation::gaussian_kernel(1.2, 7);
    const ImageTensor x = testing::random_tensor(rng, {3, 32, 32});
    const ImageTensor y = degradation::apply_operator(x, s.kernel, 4);
    const ImageTensor x0 = clamp01(imaging::resize_bicubic(testing::random_tensor(rng, {3, 8, 8}), 4.0));
    double prev = consistency_residual(x0, y, s, 4);
    const double r0 = prev;
    for (int k = 1; k <= 10; ++k) {
      const double rk = consistency_residual(data_consistency_refine(x0, y, s, 4, 0.1, k), y, s, 4);
      CHECK(rk <= prev);
      prev = rk;
    }
    CHECK(prev < r0);
  }
  degradation::DegradationSample s;
  CHECK(code_of([&] { data_consistency_refine(Tensor::zeros(1, 4, 4), Tensor::zeros(1, 4, 4), s, 1, 0.0, 1); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("spearman with ties") {
  const std::vector<double> t{0, 0.2, 0.4, 0.6, 0.8, 1.0};
  CHECK(spearman(t, std::vector<double>{1, 2, 3, 4, 5, 6}) == doctest::Approx(1.0));
  CHECK(spearman(t, std::vector<double>{6, 5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  // ranks of {1,1,2,3,4,5} are {1.5,1.5,3,4,5,6}
  const double r = spearman(t, std::vector<double>{1, 1, 2, 3, 4, 5});
  CHECK(r == doctest::Approx(17.0 / std::sqrt(17.5 * 17.0)).epsilon(1e-12));
  CHECK(code_of([&] { spearman(t, std::vector<double>{1, 2}); }) == ErrorCode::LengthMismatch);
}
