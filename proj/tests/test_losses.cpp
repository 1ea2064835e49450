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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "tsr/degradation.hpp"
#include "tsr/losses.hpp"

using namespace tsr;
using namespace tsr::losses;
using diffusion::handle;
using tsr::testing::max_rel_error;
using tsr::testing::numeric_grad;

namespace {

// FD tolerance for every loss gradient.
constexpr double kGradTol = 1e-3;

nets::NetConfig tiny() {
  nets::NetConfig cfg;
  cfg.width = 4;
  cfg.depth = 1;
  cfg.t_embed_dim = 4;
  cfg.cond_dim = 2;
  return cfg;
}

nets::DenoiserNet random_net(std::uint64_t seed, double stddev) {
  auto net = nets::init_denoiser(seed, tiny());
  Rng rng(seed + 1000);
  testing::randomize(net.params, rng, stddev);
  return net;
}

std::vector<degradation::TrainingPair> mid_range_batch(Rng& rng, int n) {
  std::vector<degradation::TrainingPair> out;
  for (int i = 0; i < n; ++i)
    out.push_back({testing::random_tensor(rng, {3, 4, 4}, 0.3, 0.7), testing::random_tensor(rng, {3, 16, 16}, 0.2, 0.8)});
  return out;
}

ImageTensor box_blur(const ImageTensor& x) {
  ImageTensor out(x.shape());
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < x.height(); ++y)
      for (int xx = 0; xx < x.width(); ++xx) {
        double s = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int sy = y + dy, sx = xx + dx;
            if (sy < 0 || sy >= x.height() || sx < 0 || sx >= x.width()) continue;
            s += x.at(c, sy, sx);
            ++n;
          }
        out.at(c, y, xx) = s / n;
      }
  return out;
}

}  // namespace

TEST_CASE("percep_dist: identity, symmetry, size floor") {
  const PercepExtractor ex;
  Rng rng(1);
  const ImageTensor a = testing::random_tensor(rng, {3, 20, 18});
  const ImageTensor b = testing::random_tensor(rng, {3, 20, 18});
  CHECK(percep_dist(ex, a, a) == 0.0);
  CHECK(percep_dist(ex, a, b) == percep_dist(ex, b, a));
  CHECK(percep_dist(ex, a, b) > 0.0);
  CHECK_THROWS_AS(percep_dist(ex, testing::random_tensor(rng, {3, 8, 8}), testing::random_tensor(rng, {3, 8, 8})),
                  Error);
  CHECK_THROWS_AS(percep_dist(ex, a, testing::random_tensor(rng, {3, 20, 17})), Error);
}

TEST_CASE("percep_dist ranks blur closer than shuffled pixels on toy images") {
  const PercepExtractor ex;
  int wins = 0;
  for (int i = 0; i < 20; ++i) {
    const ImageTensor x = degradation::toy_image(32, 500 + i);
    ImageTensor shuffled = x;
    Rng rng(i);
    for (int c = 0; c < 3; ++c) std::shuffle(shuffled.plane(c), shuffled.plane(c) + x.shape().plane(), rng);
    if (percep_dist(ex, x, box_blur(x)) < percep_dist(ex, x, shuffled)) ++wins;
  }
  CHECK(wins == 20);
}

TEST_CASE("percep_dist gradient matches finite differences") {
  const PercepExtractor ex;
  Rng rng(2);
  ImageTensor a = testing::random_tensor(rng, {3, 16, 20});
  const ImageTensor b = testing::random_tensor(rng, {3, 16, 20});
  Tensor g;
  percep_dist(ex, a, b, &g);
  const auto num = numeric_grad(a.values(), [&] { return percep_dist(ex, a, b); });
  CHECK(max_rel_error(g.values(), num) < kGradTol);
}

TEST_CASE("rec_loss zero case, analytic offset case, and gradient") {
  const PercepExtractor ex;
  Rng rng(3);
  const ImageTensor gt = testing::random_tensor(rng, {3, 16, 16}, 0.2, 0.8);
  LossWeights w;
  CHECK(rec_loss(gt, gt, w, ex) == 0.0);

  ImageTensor off = gt;
  for (double& v : off.values()) v += 0.1;
  w.lambda_lp = 0.0;
  w.lambda_l2 = 3.0;
  CHECK(rec_loss(off, gt, w, ex) == doctest::Approx(0.03).epsilon(1e-12));

  w = LossWeights{};
  ImageTensor x0 = testing::random_tensor(rng, {3, 16, 16}, 0.2, 0.8);
  Tensor g;
  rec_loss(x0, gt, w, ex, &g);
  const auto num = numeric_grad(x0.values(), [&] { return rec_loss(x0, gt, w, ex); });
  CHECK(max_rel_error(g.values(), num) < kGradTol);
}

TEST_CASE("distill_loss zero cases") {
  Rng rng(4);
  const auto net = random_net(5, 0.2);
  const Latent z_t = testing::normal_tensor(rng, {3, 6, 6});
  const Latent z_other = testing::normal_tensor(rng, {3, 6, 6});
  const std::vector<double> c{0.3, -0.2};
  CHECK(distill_loss(handle(net), handle(net), z_t, z_t, 0.4, c, 5.5) == 0.0);
  // gamma 0 and identical functions: the z_t argument does not matter.
  CHECK(distill_loss(handle(net), handle(net), z_other, z_t, 0.4, c, 0.0) == 0.0);
  CHECK(distill_loss(handle(net), handle(net), z_other, z_t, 0.4, c, 5.5) > 0.0);
}

TEST_CASE("distill_loss gradients w.r.t. student params and z_ts match finite differences") {
  Rng rng(6);
  auto student = random_net(7, 0.2);
  const auto teacher = random_net(8, 0.2);
  const Latent z_t = testing::normal_tensor(rng, {3, 5, 6}, 0.5);
  Latent z_ts = testing::normal_tensor(rng, {3, 5, 6}, 0.5);
  const std::vector<double> c{0.1, 0.4};
  auto f = [&] { return distill_loss(handle(teacher), handle(student), z_t, z_ts, 0.3, c, 5.5); };
  ParamSet d = student.params.zeros_like();
  Tensor dz;
  distill_loss(handle(teacher), handle(student), z_t, z_ts, 0.3, c, 5.5, {&d, &dz, 1.0});
  MESSAGE("student params " << student.params.count());
  CHECK(student.params.count() <= 5000);
  CHECK(max_rel_error(testing::flatten(d), numeric_grad(student.params, f)) < kGradTol);
  CHECK(max_rel_error(dz.values(), numeric_grad(z_ts.values(), f)) < kGradTol);
}

TEST_CASE("teacher-only alignment term still trains the student through z_ts") {
  Rng rng(9);
  auto student = random_net(10, 0.2);
  const auto teacher = random_net(11, 0.2);
  const auto codec = nets::identity_codec(3);
  const auto pair = mid_range_batch(rng, 1)[0];
  const Latent eps = testing::normal_tensor(rng, {3, 16, 16}, 0.1);
  const Latent z_t = diffusion::add_noise(nets::encode(codec, pair.gt), diffusion::Timestep(0.5), eps);
  // Only the gamma term, as a function of the student via z_ts = restore + t * eps.
  auto term = [&] {
    const auto r = diffusion::student_restore(handle(student), codec, pair.lr, 4);
    const Latent z_ts = diffusion::add_noise(r.z0s, diffusion::Timestep(0.5), eps);
    return mean_sq_diff(handle(teacher)(z_ts, 0.5, {}), handle(teacher)(z_t, 0.5, {}));
  };
  const auto num = numeric_grad(student.params, term);
  double biggest = 0.0;
  for (double v : num) biggest = std::max(biggest, std::abs(v));
  CHECK(biggest > 1e-6);
}

TEST_CASE("stage1_loss: zero weights, perfect student, gradient, scaling law") {
  Rng rng(12);
  const PercepExtractor ex;
  const auto codec = nets::identity_codec(3);
  auto student = random_net(13, 0.05);
  const auto tf = random_net(14, 0.2);
  const auto tr = random_net(15, 0.2);
  const auto batch = mid_range_batch(rng, 2);
  const std::vector<double> cond{0.2, 0.1};
  Stage1Nets nets{handle(student), handle(tf), handle(tr), &codec, 4, 0.1, cond};

  SUBCASE("all-zero weights give zero loss and zero gradients") {
    LossWeights w{0, 0, 0, 0, 0};
    Rng r(1);
    ParamSet d = student.params.zeros_like();
    CHECK(stage1_loss(batch, nets, w, ex, r, &d).total == 0.0);
    for (double v : testing::flatten(d)) CHECK(v == 0.0);
  }

  SUBCASE("perfect student scores zero") {
    // Fresh nets output zero everywhere, so all three are the same function,
    // and the ground truth is exactly the bicubic upscale of the input.
    const auto zero_net = nets::init_denoiser(16, tiny());
    std::vector<degradation::TrainingPair> exact;
    for (const auto& p : batch) exact.push_back({p.lr, clamp01(imaging::resize_bicubic(p.lr, 4.0))});
    Stage1Nets same{handle(zero_net), handle(zero_net), handle(zero_net), &codec, 4, 0.1, cond};
    Rng r(2);
    CHECK(stage1_loss(exact, same, LossWeights{}, ex, r).total == 0.0);
  }

  SUBCASE("gradient matches finite differences") {
    const LossWeights w;
    auto f = [&] {
      Rng r(3);
      return stage1_loss(batch, nets, w, ex, r).total;
    };
    Rng r(3);
    ParamSet d = student.params.zeros_like();
    const auto terms = stage1_loss(batch, nets, w, ex, r, &d);
    CHECK(terms.total == doctest::Approx(terms.rec + w.lambda_rn * terms.rn + w.lambda_fl * terms.fl).epsilon(1e-14));
    CHECK(max_rel_error(testing::flatten(d), numeric_grad(student.params, f)) < kGradTol);
  }

  SUBCASE("scaling lambda_fl by k scales its gradient contribution by k") {
    auto grad_with = [&](double lfl) {
      LossWeights w{0, 0, lfl, 0, 5.5};
      Rng r(4);
      ParamSet d = student.params.zeros_like();
      stage1_loss(batch, nets, w, ex, r, &d);
      return testing::flatten(d);
    };
    const auto g1 = grad_with(1.0), g3 = grad_with(3.0);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-12));
  }
}

TEST_CASE("stage1_loss decreases over 50 steps on a fixed batch") {
  Rng rng(17);
  const PercepExtractor ex;
  const auto codec = nets::identity_codec(3);
  auto student = random_net(18, 0.05);
  const auto tf = random_net(19, 0.2);
  const auto tr = random_net(20, 0.2);
  const auto batch = mid_range_batch(rng, 2);
  Stage1Nets nets{handle(student), handle(tf), handle(tr), &codec, 4, 0.1, {}};
  std::vector<double> losses;
  for (int step = 1; step <= 50; ++step) {
    Rng r(21);
    ParamSet d = student.params.zeros_like();
    losses.push_back(stage1_loss(batch, nets, LossWeights{}, ex, r, &d).total);
    // plain gradient descent keeps this test independent of the trainer
    student.params.add_scaled(d, -0.05);
  }
  CHECK(losses.back() < losses.front());
  int rises = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) rises += losses[i] > losses[i - 1] ? 1 : 0;
  CHECK(rises == 0);
}

TEST_CASE("control_loss: constant field zero case, gradient, reversed interval") {
  Rng rng(22);
  const Latent z0 = testing::normal_tensor(rng, {3, 5, 5}, 0.5);
  const std::vector<double> c{0.5, -0.5};

  SUBCASE("student equal to the constant field gives exactly zero") {
    // A fresh net outputs zero: the constant field v = 0 is matched exactly.
    const auto zero_net = nets::init_denoiser(23, tiny());
    CHECK(control_loss(constant_field(Tensor(z0.shape())), handle(zero_net), z0, 0.2, 0.7, c) == 0.0);
    const Tensor v = testing::normal_tensor(rng, z0.shape());
    CHECK(control_loss(constant_field(v), handle(zero_net), z0, 0.2, 0.7, c) ==
          doctest::Approx(0.25 * mean_sq_diff(v, Tensor(z0.shape()))).epsilon(1e-12));
  }

  SUBCASE("student equal to teacher with a t-independent field gives zero") {
    // A fresh net is the zero field for every t, hence affine in t.
    const auto zero_net = nets::init_denoiser(24, tiny());
    const EpsField teacher = field_of(handle(zero_net));
    for (auto form : {ControlForm::AtZ0, ControlForm::AtNoised}) {
      CHECK(control_loss(teacher, handle(zero_net), z0, 0.1, 0.9, c, form) == 0.0);
    }
  }

  SUBCASE("gradient matches finite differences for both forms") {
    auto student = random_net(25, 0.2);
    const auto teacher_net = random_net(26, 0.2);
    const EpsField teacher = field_of(handle(teacher_net));
    for (auto form : {ControlForm::AtZ0, ControlForm::AtNoised}) {
      auto f = [&] { return control_loss(teacher, handle(student), z0, 0.25, 0.8, c, form); };
      ParamSet d = student.params.zeros_like();
      control_loss(teacher, handle(student), z0, 0.25, 0.8, c, form, &d);
      CHECK(max_rel_error(testing::flatten(d), numeric_grad(student.params, f)) < kGradTol);
    }
  }

  SUBCASE("t' <= t is rejected") {
    const auto net = nets::init_denoiser(27, tiny());
    try {
      control_loss(field_of(handle(net)), handle(net), z0, 0.5, 0.5, c);
      FAIL("expected ReversedInterval");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ReversedInterval);
    }
  }
}

TEST_CASE("stage2_loss: gradient, determinism, convergence on a constant field") {
  Rng rng(28);
  std::vector<Latent> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(testing::normal_tensor(rng, {3, 4, 4}, 0.5));
  auto student = random_net(29, 0.2);
  const Tensor v = testing::normal_tensor(rng, {3, 4, 4}, 0.3);
  const EpsField teacher = constant_field(v);

  auto f = [&] {
    Rng r(30);
    return stage2_loss(batch, teacher, handle(student), r, {});
  };
  Rng r(30);
  ParamSet d = student.params.zeros_like();
  const double l0 = stage2_loss(batch, teacher, handle(student), r, {}, ControlForm::AtZ0, &d);
  CHECK(l0 == f());
  CHECK(max_rel_error(testing::flatten(d), numeric_grad(student.params, f)) < kGradTol);

  std::vector<double> losses;
  for (int step = 0; step < 100; ++step) {
    Rng rs(31);
    ParamSet g = student.params.zeros_like();
    losses.push_back(stage2_loss(batch, teacher, handle(student), rs, {}, ControlForm::AtZ0, &g));
    student.params.add_scaled(g, -0.5);
  }
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("loss weights reject negative entries") {
  LossWeights w;
  w.lambda_fl = -1.0;
  CHECK_THROWS_AS(w.validate(), Error);
  w = LossWeights{};
  CHECK_NOTHROW(w.validate());
}
