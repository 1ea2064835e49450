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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tsr/layers.hpp"
#include "tsr/random.hpp"
#include "tsr/tensor.hpp"

namespace tsr::testing {

inline Tensor random_tensor(Rng& rng, Shape s, double lo = 0.0, double hi = 1.0) {
  Tensor t(s);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

inline Tensor normal_tensor(Rng& rng, Shape s, double stddev = 1.0) {
  Tensor t(s);
  fill_normal(rng, t.values(), stddev);
  return t;
}

inline void randomize(ParamSet& p, Rng& rng, double stddev) {
  for (auto& item : p.items()) fill_normal(rng, item.value, stddev);
}

// Largest elementwise relative error between analytic and central-difference
// gradients. Entries far below the gradient's scale are compared against
// 1e-3 of that scale instead of their own magnitude.
inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Central differences of f over every entry of `x`, restoring x afterwards.
inline std::vector<double> numeric_grad(std::span<double> x, const std::function<double()>& f, double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f();
    x[i] = keep - h;
    const double fm = f();
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> flatten(const ParamSet& p) {
  std::vector<double> out;
  for (const auto& item : p.items()) out.insert(out.end(), item.value.begin(), item.value.end());
  return out;
}

// Central differences over every scalar of a parameter set.
inline std::vector<double> numeric_grad(ParamSet& p, const std::function<double()>& f, double h = 1e-4) {
  std::vector<double> g;
  for (auto& item : p.items()) {
    const auto part = numeric_grad(std::span<double>(item.value), f, h);
    g.insert(g.end(), part.begin(), part.end());
  }
  return g;
}

}  // namespace tsr::testing
