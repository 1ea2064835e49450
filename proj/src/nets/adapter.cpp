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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tsr/nets.hpp"

namespace tsr::nets {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// rows = leading dim, cols = product of the rest
std::pair<int, int> matrix_view(const Param& p) {
  if (p.shape.size() < 2) fail(ErrorCode::RankMismatch, "adapter target " + p.name + " is not a matrix");
  const int n = p.shape[0];
  const int m = std::accumulate(p.shape.begin() + 1, p.shape.end(), 1, std::multiplies<>());
  return {n, m};
}

void check_factors(const DenoiserNet& net, const LowRankAdapter& a) {
  for (const auto& t : a.targets) {
    if (!net.params.contains(t)) fail(ErrorCode::RankMismatch, "adapter target " + t + " missing from network");
    const auto [n, m] = matrix_view(net.params.get(t));
    const std::string an = t + ".lora_a", bn = t + ".lora_b";
    if (!a.factors.contains(an) || !a.factors.contains(bn)) {
      fail(ErrorCode::RankMismatch, "adapter factors for " + t + " missing");
    }
    const auto& A = a.factors.get(an);
    const auto& B = a.factors.get(bn);
    if (A.shape != std::vector<int>{a.rank, m} || B.shape != std::vector<int>{n, a.rank}) {
      fail(ErrorCode::RankMismatch, "adapter factors for " + t + " do not match a " + std::to_string(n) + "x" +
                                        std::to_string(m) + " target at rank " + std::to_string(a.rank));
    }
  }
}

}  // namespace

LowRankAdapter make_adapter(const DenoiserNet& net, int rank, double scale, std::uint64_t seed,
                            std::vector<std::string> targets) {
  if (rank < 1) fail(ErrorCode::InvalidArgument, "adapter rank must be >= 1");
  if (targets.empty()) targets = adaptable_layers(net);
  LowRankAdapter a;
  a.rank = rank;
  a.scale = scale;
  a.targets = std::move(targets);
  Rng rng(seed);
  for (const auto& t : a.targets) {
    if (!net.params.contains(t)) fail(ErrorCode::RankMismatch, "adapter target " + t + " missing from network");
    const auto [n, m] = matrix_view(net.params.get(t));
    layers::init_normal(rng, a.factors.add(t + ".lora_a", {rank, m}).value, 1.0 / std::sqrt(static_cast<double>(m)));
    a.factors.add(t + ".lora_b", {n, rank});
  }
  return a;
}

AdaptedView::AdaptedView(const DenoiserNet& base, const LowRankAdapter& adapter) : base_(&base), adapter_(&adapter) {
  check_factors(base, adapter);
}

ParamSet AdaptedView::effective_params() const {
  ParamSet eff = base_->params;
  const auto& a = *adapter_;
  for (const auto& t : a.targets) {
    auto& w = eff.get(t);
    const auto [n, m] = matrix_view(w);
    ConstMapMat A(a.factors.data(t + ".lora_a"), a.rank, m);
    ConstMapMat B(a.factors.data(t + ".lora_b"), n, a.rank);
    if (B.isZero(0.0)) continue;  // keeps the base weights bitwise, signed zeros included
    MapMat W(w.value.data(), n, m);
    W.noalias() += a.scale * (B * A);
  }
  return eff;
}

Tensor AdaptedView::forward(const Latent& z, double t, std::span<const double> c, NetCache* cache) const {
  return forward_with(base_->config, effective_params(), z, t, c, cache);
}

AdaptedView apply_adapter(const DenoiserNet& net, const LowRankAdapter& adapter) { return {net, adapter}; }

DenoiserNet merge_adapter(const DenoiserNet& net, const LowRankAdapter& adapter) {
  DenoiserNet out;
  out.config = net.config;
  out.params = AdaptedView(net, adapter).effective_params();
  return out;
}

void adapter_backward(const DenoiserNet& base, const LowRankAdapter& a, const ParamSet& d_effective,
                      ParamSet& d_factors) {
  check_factors(base, a);
  for (const auto& t : a.targets) {
    const auto [n, m] = matrix_view(base.params.get(t));
    ConstMapMat G(d_effective.data(t), n, m);
    ConstMapMat A(a.factors.data(t + ".lora_a"), a.rank, m);
    ConstMapMat B(a.factors.data(t + ".lora_b"), n, a.rank);
    MapMat dA(d_factors.data(t + ".lora_a"), a.rank, m);
    MapMat dB(d_factors.data(t + ".lora_b"), n, a.rank);
    dA.noalias() += a.scale * (B.transpose() * G);
    dB.noalias() += a.scale * (G * A.transpose());
  }
}

}  // namespace tsr::nets
