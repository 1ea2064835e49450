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

#include "tsr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tsr/kernels.hpp"

namespace tsr {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.c) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), values_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.numel()) {
    fail(ErrorCode::ShapeMismatch, "tensor payload size " + std::to_string(values_.size()) +
                                       " does not match shape " + to_string(shape_));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  kernels::active().axpy(out.size(), 1.0, b.data(), out.data());
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

void axpy(double a, const Tensor& x, Tensor& y) {
  require_same_shape(x, y, "axpy");
  kernels::active().axpy(x.size(), a, x.data(), y.data());
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  return kernels::active().dot(a.size(), a.data(), b.data());
}

double mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_sq_diff");
  if (a.empty()) return 0.0;
  return kernels::active().sq_dist(a.size(), a.data(), b.data()) / static_cast<double>(a.size());
}

double l2_norm(const Tensor& a) { return std::sqrt(kernels::active().dot(a.size(), a.data(), a.data())); }

Tensor clamp01(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Tensor& a) { return all_finite(a.values()); }

}  // namespace tsr
