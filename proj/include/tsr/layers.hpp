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

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsr/random.hpp"
#include "tsr/tensor.hpp"

namespace tsr {

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
};

// Ordered, named collection of parameter arrays. Order is insertion order and
// is part of the checkpoint format.
class ParamSet {
 public:
  Param& add(std::string name, std::vector<int> shape, double fill = 0.0);
  Param& add(Param p);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  double* data(const std::string& name) { return get(name).value.data(); }
  const double* data(const std::string& name) const { return get(name).value.data(); }

  std::vector<Param>& items() { return params_; }
  const std::vector<Param>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t count() const;  // total scalar count

  ParamSet zeros_like() const;
  void fill(double v);
  // this += s * other (same layout required)
  void add_scaled(const ParamSet& other, double s);
  bool same_layout(const ParamSet& other) const;
  bool all_finite() const;
  bool operator==(const ParamSet& other) const;

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
};

namespace layers {

// 2-D convolution, stride 1, zero padding k/2. Weights are laid out
// [out][in][k][k]; bias is [out]. The inner loops run through the kernel
// table's stencil routines.
Tensor conv2d(const Tensor& x, std::span<const double> w, std::span<const double> b, int out_c, int k);

// Accumulates dw/db (when non-empty) and returns dx when requested.
void conv2d_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, int out_c, int k,
                     std::span<double> dw, std::span<double> db, Tensor* dx);

double silu(double x);
double silu_grad(double x);
Tensor silu(const Tensor& x);
// dx = dy * silu'(x)
Tensor silu_backward(const Tensor& x, const Tensor& dy);

Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& dy, const Shape& in_shape);

Tensor space_to_depth(const Tensor& x, int f);
Tensor depth_to_space(const Tensor& x, int f);

void init_normal(Rng& rng, std::span<double> w, double stddev);

}  // namespace layers
}  // namespace tsr
