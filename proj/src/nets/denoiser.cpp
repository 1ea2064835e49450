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
#include <string>

#include "tsr/nets.hpp"

namespace tsr::nets {

using layers::conv2d;
using layers::conv2d_backward;

void NetConfig::validate() const {
  if (channels < 1) fail(ErrorCode::ValidationError, "net.channels must be >= 1");
  if (width < 1) fail(ErrorCode::ValidationError, "net.width must be >= 1");
  if (depth < 1) fail(ErrorCode::ValidationError, "net.depth must be >= 1");
  if (t_embed_dim < 2 || t_embed_dim % 2 != 0) fail(ErrorCode::ValidationError, "net.t_embed_dim must be even and >= 2");
  if (cond_dim < 0) fail(ErrorCode::ValidationError, "net.cond_dim must be >= 0");
}

namespace {

std::string blk(int i, const char* leaf) { return "blk" + std::to_string(i) + "." + leaf; }

}  // namespace

std::size_t denoiser_param_count(const NetConfig& cfg) {
  const std::size_t c = cfg.channels, w = cfg.width, e = cfg.t_embed_dim, dc = cfg.cond_dim;
  std::size_t n = w * c * 9 + w;                  // input conv
  if (dc > 0) n += w * dc + w;                     // conditioning projection
  n += cfg.depth * ((2 * w * e + 2 * w)            // modulation
                    + 2 * (w * w * 9 + w));        // two convs
  n += c * w * 9 + c;                              // output head
  return n;
}

DenoiserNet init_denoiser(std::uint64_t seed, const NetConfig& cfg) {
  cfg.validate();
  DenoiserNet net;
  net.config = cfg;
  Rng rng(seed);
  const int C = cfg.channels, W = cfg.width, E = cfg.t_embed_dim, Dc = cfg.cond_dim;
  auto& p = net.params;
  layers::init_normal(rng, p.add("in.w", {W, C, 3, 3}).value, std::sqrt(2.0 / (C * 9)));
  p.add("in.b", {W});
  if (Dc > 0) {
    layers::init_normal(rng, p.add("cond.w", {W, Dc}).value, 0.1 / std::sqrt(static_cast<double>(Dc)));
    p.add("cond.b", {W});
  }
  for (int i = 0; i < cfg.depth; ++i) {
    layers::init_normal(rng, p.add(blk(i, "mod.w"), {2 * W, E}).value, 0.1 / std::sqrt(static_cast<double>(E)));
    p.add(blk(i, "mod.b"), {2 * W});
    layers::init_normal(rng, p.add(blk(i, "conv1.w"), {W, W, 3, 3}).value, std::sqrt(2.0 / (W * 9)));
    p.add(blk(i, "conv1.b"), {W});
    layers::init_normal(rng, p.add(blk(i, "conv2.w"), {W, W, 3, 3}).value, 0.5 * std::sqrt(2.0 / (W * 9)));
    p.add(blk(i, "conv2.b"), {W});
  }
  p.add("out.w", {C, W, 3, 3});
  p.add("out.b", {C});
  return net;
}

std::vector<double> timestep_embedding(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> e(dim);
  for (int i = 0; i < half; ++i) {
    const double f = half > 1 ? std::exp(std::log(100.0) * i / (half - 1)) : 1.0;
    e[i] = std::sin(f * t);
    e[half + i] = std::cos(f * t);
  }
  return e;
}

std::vector<std::string> adaptable_layers(const DenoiserNet& net) {
  std::vector<std::string> out;
  for (const auto& p : net.params.items()) {
    if (p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".w") == 0) out.push_back(p.name);
  }
  return out;
}

Tensor forward_denoiser(const DenoiserNet& net, const Latent& z, double t, std::span<const double> c, NetCache* cache) {
  return forward_with(net.config, net.params, z, t, c, cache);
}

Tensor forward_with(const NetConfig& cfg, const ParamSet& p, const Latent& z, double t, std::span<const double> c,
                    NetCache* cache) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::InvalidArgument, "timestep must lie in [0,1], got " + std::to_string(t));
  if (z.channels() != cfg.channels) {
    fail(ErrorCode::ShapeMismatch, "denoiser expects " + std::to_string(cfg.channels) + " channels, got " +
                                       to_string(z.shape()));
  }
  if (!c.empty() && static_cast<int>(c.size()) != cfg.cond_dim) {
    fail(ErrorCode::ShapeMismatch, "conditioning vector has " + std::to_string(c.size()) + " entries, expected " +
                                       std::to_string(cfg.cond_dim));
  }
  const int W = cfg.width, E = cfg.t_embed_dim;
  const std::size_t plane = z.shape().plane();
  const std::vector<double> temb = timestep_embedding(t, E);
  std::vector<double> cond(cfg.cond_dim, 0.0);
  if (!c.empty()) cond.assign(c.begin(), c.end());

  Tensor h = conv2d(z, p.get("in.w").value, p.get("in.b").value, W, 3);
  if (cfg.cond_dim > 0) {
    const double* cw = p.data("cond.w");
    const double* cb = p.data("cond.b");
    for (int ch = 0; ch < W; ++ch) {
      double bias = cb[ch];
      for (int k = 0; k < cfg.cond_dim; ++k) bias += cw[ch * cfg.cond_dim + k] * cond[k];
      if (bias == 0.0) continue;
      double* pl = h.plane(ch);
      for (std::size_t j = 0; j < plane; ++j) pl[j] += bias;
    }
  }
  if (cache != nullptr) {
    cache->z = z;
    cache->temb = temb;
    cache->cond = cond;
    cache->blocks.assign(cfg.depth, {});
  }
  for (int i = 0; i < cfg.depth; ++i) {
    const double* mw = p.data(blk(i, "mod.w"));
    const double* mb = p.data(blk(i, "mod.b"));
    std::vector<double> mod(2 * W);
    for (int r = 0; r < 2 * W; ++r) {
      double s = mb[r];
      for (int k = 0; k < E; ++k) s += mw[r * E + k] * temb[k];
      mod[r] = s;
    }
    Tensor act_in = layers::silu(h);
    Tensor pre_mod = conv2d(act_in, p.get(blk(i, "conv1.w")).value, p.get(blk(i, "conv1.b")).value, W, 3);
    Tensor pre_act = pre_mod;
    for (int ch = 0; ch < W; ++ch) {
      const double g = 1.0 + mod[ch], b = mod[W + ch];
      double* pl = pre_act.plane(ch);
      for (std::size_t j = 0; j < plane; ++j) pl[j] = pl[j] * g + b;
    }
    Tensor act = layers::silu(pre_act);
    Tensor r = conv2d(act, p.get(blk(i, "conv2.w")).value, p.get(blk(i, "conv2.b")).value, W, 3);
    if (cache != nullptr) {
      auto& b = cache->blocks[i];
      b.h_in = h;
      b.act_in = std::move(act_in);
      b.pre_mod = std::move(pre_mod);
      b.pre_act = std::move(pre_act);
      b.act = std::move(act);
      b.gamma.assign(mod.begin(), mod.begin() + W);
    }
    axpy(1.0, r, h);
  }
  Tensor act_out = layers::silu(h);
  Tensor out = conv2d(act_out, p.get("out.w").value, p.get("out.b").value, cfg.channels, 3);
  if (cache != nullptr) {
    cache->h_out = std::move(h);
    cache->act_out = std::move(act_out);
  }
  return out;
}

void backward_denoiser(const NetConfig& cfg, const ParamSet& p, const NetCache& cache, const Tensor& dout,
                       ParamSet* dparams, Tensor* dz) {
  const int W = cfg.width, E = cfg.t_embed_dim;
  const std::size_t plane = cache.z.shape().plane();
  auto grad = [&](const std::string& name) -> std::span<double> {
    if (dparams == nullptr) return {};
    return dparams->get(name).value;
  };

  Tensor d_act_out;
  conv2d_backward(cache.act_out, dout, p.get("out.w").value, cfg.channels, 3, grad("out.w"), grad("out.b"), &d_act_out);
  Tensor dh = layers::silu_backward(cache.h_out, d_act_out);

  for (int i = cfg.depth - 1; i >= 0; --i) {
    const auto& b = cache.blocks[i];
    Tensor d_act;
    conv2d_backward(b.act, dh, p.get(blk(i, "conv2.w")).value, W, 3, grad(blk(i, "conv2.w")), grad(blk(i, "conv2.b")), &d_act);
    Tensor d_pre_act = layers::silu_backward(b.pre_act, d_act);
    std::vector<double> dmod(2 * W, 0.0);
    Tensor d_pre_mod = d_pre_act;
    for (int ch = 0; ch < W; ++ch) {
      const double* g = d_pre_act.plane(ch);
      const double* u = b.pre_mod.plane(ch);
      double sg = 0.0, sb = 0.0;
      for (std::size_t j = 0; j < plane; ++j) {
        sg += g[j] * u[j];
        sb += g[j];
      }
      dmod[ch] = sg;
      dmod[W + ch] = sb;
      const double scale = 1.0 + b.gamma[ch];
      double* dp = d_pre_mod.plane(ch);
      for (std::size_t j = 0; j < plane; ++j) dp[j] *= scale;
    }
    if (dparams != nullptr) {
      double* dmw = dparams->data(blk(i, "mod.w"));
      double* dmb = dparams->data(blk(i, "mod.b"));
      for (int r = 0; r < 2 * W; ++r) {
        dmb[r] += dmod[r];
        for (int k = 0; k < E; ++k) dmw[r * E + k] += dmod[r] * cache.temb[k];
      }
    }
    Tensor d_act_in;
    conv2d_backward(b.act_in, d_pre_mod, p.get(blk(i, "conv1.w")).value, W, 3, grad(blk(i, "conv1.w")),
                    grad(blk(i, "conv1.b")), &d_act_in);
    axpy(1.0, layers::silu_backward(b.h_in, d_act_in), dh);
  }

  if (cfg.cond_dim > 0 && dparams != nullptr) {
    double* dcw = dparams->data("cond.w");
    double* dcb = dparams->data("cond.b");
    for (int ch = 0; ch < W; ++ch) {
      double s = 0.0;
      const double* g = dh.plane(ch);
      for (std::size_t j = 0; j < plane; ++j) s += g[j];
      dcb[ch] += s;
      for (int k = 0; k < cfg.cond_dim; ++k) dcw[ch * cfg.cond_dim + k] += s * cache.cond[k];
    }
  }
  conv2d_backward(cache.z, dh, p.get("in.w").value, W, 3, grad("in.w"), grad("in.b"), dz);
}

}  // namespace tsr::nets
