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
#include "tsr/degradation.hpp"
#include "tsr/imaging.hpp"
#include "tsr/nets.hpp"

using namespace tsr;
using namespace tsr::nets;
using tsr::testing::max_rel_error;
using tsr::testing::numeric_grad;

namespace {

// Direct 2-D convolution with zero padding, written independently of the
// stencil path.
Tensor naive_conv(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b, int out_c, int k) {
  const int in_c = x.channels(), h = x.height(), wd = x.width(), p = k / 2;
  Tensor y(Shape{out_c, h, wd});
  for (int o = 0; o < out_c; ++o)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < wd; ++xx) {
        double s = b[o];
        for (int i = 0; i < in_c; ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int sy = yy + ky - p, sx = xx + kx - p;
              if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
              s += w[((o * in_c + i) * k + ky) * k + kx] * x.at(i, sy, sx);
            }
        y.at(o, yy, xx) = s;
      }
  return y;
}

NetConfig tiny_config() {
  NetConfig cfg;
  cfg.channels = 3;
  cfg.width = 4;
  cfg.depth = 1;
  cfg.t_embed_dim = 4;
  cfg.cond_dim = 2;
  return cfg;
}

}  // namespace

TEST_CASE("conv2d matches direct convolution for k=1 and k=3") {
  Rng rng(1);
  for (int k : {1, 3}) {
    const Tensor x = testing::random_tensor(rng, {3, 7, 5}, -1, 1);
    std::vector<double> w(4 * 3 * k * k), b(4);
    fill_normal(rng, w);
    fill_normal(rng, b);
    const Tensor got = layers::conv2d(x, w, b, 4, k);
    const Tensor want = naive_conv(x, w, b, 4, k);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(2);
  Tensor x = testing::random_tensor(rng, {2, 5, 6}, -1, 1);
  std::vector<double> w(3 * 2 * 9), b(3);
  fill_normal(rng, w);
  fill_normal(rng, b);
  const Tensor probe = testing::normal_tensor(rng, {3, 5, 6});
  auto f = [&] { return dot(layers::conv2d(x, w, b, 3, 3), probe); };
  std::vector<double> dw(w.size()), db(b.size());
  Tensor dx;
  layers::conv2d_backward(x, probe, w, 3, 3, dw, db, &dx);
  CHECK(max_rel_error(dw, numeric_grad(std::span<double>(w), f)) < 1e-6);
  CHECK(max_rel_error(db, numeric_grad(std::span<double>(b), f)) < 1e-6);
  CHECK(max_rel_error(dx.values(), numeric_grad(x.values(), f)) < 1e-6);
}

TEST_CASE("space_to_depth and depth_to_space are inverse") {
  Rng rng(3);
  const Tensor x = testing::random_tensor(rng, {3, 8, 6});
  const Tensor packed = layers::space_to_depth(x, 2);
  CHECK(packed.shape() == Shape{12, 4, 3});
  CHECK(layers::depth_to_space(packed, 2) == x);
  CHECK_THROWS_AS(layers::space_to_depth(testing::random_tensor(rng, {3, 5, 6}), 2), Error);
}

TEST_CASE("denoiser parameter count matches the closed form") {
  NetConfig cfg;
  CHECK(denoiser_param_count(cfg) == 11331);
  CHECK(init_denoiser(0, cfg).params.count() == 11331);
  const NetConfig tiny = tiny_config();
  CHECK(init_denoiser(0, tiny).params.count() == denoiser_param_count(tiny));
}

TEST_CASE("fresh denoiser outputs zeros of the input shape") {
  const auto net = init_denoiser(7, NetConfig{});
  Rng rng(4);
  const Tensor z = testing::random_tensor(rng, {3, 12, 10});
  const Tensor out = forward_denoiser(net, z, 0.3, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(out.shape() == z.shape());
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("denoiser rejects bad inputs") {
  const auto net = init_denoiser(7, tiny_config());
  Rng rng(5);
  const Tensor z = testing::random_tensor(rng, {3, 4, 4});
  CHECK_THROWS_AS(forward_denoiser(net, z, 1.5, {}), Error);
  CHECK_THROWS_AS(forward_denoiser(net, testing::random_tensor(rng, {2, 4, 4}), 0.5, {}), Error);
  const std::vector<double> bad_c{1, 2, 3};
  CHECK_THROWS_AS(forward_denoiser(net, z, 0.5, bad_c), Error);
}

TEST_CASE("denoiser is deterministic for a seed") {
  Rng rng(6);
  auto a = init_denoiser(11, tiny_config());
  auto b = init_denoiser(11, tiny_config());
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == init_denoiser(12, tiny_config()).params);
}

TEST_CASE("denoiser gradients match finite differences") {
  Rng rng(8);
  auto net = init_denoiser(3, tiny_config());
  testing::randomize(net.params, rng, 0.3);
  Tensor z = testing::random_tensor(rng, {3, 6, 5}, -1, 1);
  const std::vector<double> c{0.4, -0.7};
  const Tensor probe = testing::normal_tensor(rng, {3, 6, 5});
  auto f = [&] { return dot(forward_denoiser(net, z, 0.37, c), probe); };

  NetCache cache;
  forward_denoiser(net, z, 0.37, c, &cache);
  ParamSet grads = net.params.zeros_like();
  Tensor dz;
  backward_denoiser(net.config, net.params, cache, probe, &grads, &dz);

  CHECK(max_rel_error(testing::flatten(grads), numeric_grad(net.params, f)) < 1e-5);
  CHECK(max_rel_error(dz.values(), numeric_grad(z.values(), f)) < 1e-5);
}

TEST_CASE("timestep embedding is bounded and time dependent") {
  const auto a = timestep_embedding(0.0, 8);
  const auto b = timestep_embedding(0.5, 8);
  CHECK(a.size() == 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(a[i] == 0.0);
    CHECK(a[4 + i] == 1.0);
  }
  CHECK(a != b);
}

TEST_CASE("identity codec round-trips exactly") {
  const Codec codec = identity_codec(3);
  Rng rng(9);
  const Tensor x = testing::random_tensor(rng, {3, 9, 7});
  CHECK(decode(codec, encode(codec, x)) == x);
}

TEST_CASE("learned codec gradients match finite differences") {
  Rng rng(10);
  Codec codec = init_learned_codec(4, 3, 6, 2);
  Tensor x = testing::random_tensor(rng, {3, 4, 6});
  auto f = [&] { return 0.5 * mean_sq_diff(decode_linear(codec, encode(codec, x)), x); };
  const Latent z = encode(codec, x);
  Tensor dy = sub(decode_linear(codec, z), x);
  for (double& v : dy.values()) v /= static_cast<double>(dy.size());
  ParamSet grads = codec.params.zeros_like();
  const Latent dz = decode_linear_backward(codec, dy, &grads, &z);
  encode_backward(codec, x, dz, &grads);
  CHECK(max_rel_error(testing::flatten(grads), numeric_grad(codec.params, f)) < 1e-6);
  CHECK_THROWS_AS(encode(codec, testing::random_tensor(rng, {3, 5, 6})), Error);
}

TEST_CASE("learned codec reaches 30 dB on held-out toy patches") {
  std::vector<ImageTensor> train, test;
  imaging::PatchSpec spec;
  spec.size = 16;
  spec.stride = 16;
  for (int i = 0; i < 12; ++i) {
    const auto patches = imaging::crop_patches(degradation::toy_image(64, 100 + i), spec);
    auto& dst = i < 9 ? train : test;
    dst.insert(dst.end(), patches.begin(), patches.end());
  }
  Codec codec = init_learned_codec(5, 3, 10, 2);
  train_codec(codec, train, 300, 1e-3, 6);
  double mse = 0.0;
  for (const auto& x : test) mse += mean_sq_diff(decode(codec, encode(codec, x)), x);
  mse /= static_cast<double>(test.size());
  const double psnr = 10.0 * std::log10(1.0 / mse);
  MESSAGE("held-out codec PSNR " << psnr);
  CHECK(psnr > 30.0);
}

TEST_CASE("fresh adapter is a no-op and merge equals the lazy view") {
  Rng rng(12);
  auto net = init_denoiser(13, tiny_config());
  testing::randomize(net.params, rng, 0.2);
  auto adapter = make_adapter(net, 2, 1.0, 14);
  const Tensor z = testing::random_tensor(rng, {3, 5, 5});
  const std::vector<double> c{0.3, 0.1};
  CHECK(apply_adapter(net, adapter).forward(z, 0.4, c) == forward_denoiser(net, z, 0.4, c));
  CHECK(merge_adapter(net, adapter).params == net.params);

  testing::randomize(adapter.factors, rng, 0.2);
  const auto merged = merge_adapter(net, adapter);
  CHECK_FALSE(merged.params == net.params);
  CHECK(apply_adapter(net, adapter).forward(z, 0.4, c) == forward_denoiser(merged, z, 0.4, c));
}

TEST_CASE("adapter factor gradients match finite differences") {
  Rng rng(15);
  auto net = init_denoiser(16, tiny_config());
  testing::randomize(net.params, rng, 0.3);
  auto adapter = make_adapter(net, 2, 0.5, 17);
  testing::randomize(adapter.factors, rng, 0.2);
  const Tensor z = testing::random_tensor(rng, {3, 5, 4});
  const Tensor probe = testing::normal_tensor(rng, {3, 5, 4});
  auto f = [&] { return dot(apply_adapter(net, adapter).forward(z, 0.6, {}), probe); };
  NetCache cache;
  const AdaptedView view(net, adapter);
  const ParamSet eff = view.effective_params();
  forward_with(net.config, eff, z, 0.6, {}, &cache);
  ParamSet d_eff = eff.zeros_like();
  backward_denoiser(net.config, eff, cache, probe, &d_eff, nullptr);
  ParamSet d_fac = adapter.factors.zeros_like();
  adapter_backward(net, adapter, d_eff, d_fac);
  CHECK(max_rel_error(testing::flatten(d_fac), numeric_grad(adapter.factors, f)) < 1e-5);
}

TEST_CASE("adapter shape errors") {
  auto net = init_denoiser(18, tiny_config());
  auto adapter = make_adapter(net, 2, 1.0, 19);
  CHECK_THROWS_AS(make_adapter(net, 2, 1.0, 19, {"no.such.w"}), Error);
  auto other = init_denoiser(18, NetConfig{});
  try {
    apply_adapter(other, adapter);
    FAIL("expected RankMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankMismatch);
  }
}

TEST_CASE("rank-4 adapter trains far fewer parameters than the full net") {
  const auto net = init_denoiser(20, NetConfig{});
  const auto adapter = make_adapter(net, 4, 1.0, 21);
  const double ratio = static_cast<double>(net.params.count()) / static_cast<double>(adapter.factors.count());
  MESSAGE("full/trainable parameter ratio " << ratio);
  CHECK(ratio > 1.5);
}
