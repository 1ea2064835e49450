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
#include <span>
#include <string>
#include <vector>

#include "tsr/error.hpp"

namespace tsr {

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

// Planar [C,H,W] array of doubles. Images, latents, and network activations
// all use this one layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(int c, int h, int w) { return Tensor(Shape{c, h, w}); }
  static Tensor filled(int c, int h, int w, double v) { return Tensor(Shape{c, h, w}, v); }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.c; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double* plane(int c) { return values_.data() + static_cast<std::size_t>(c) * shape_.plane(); }
  const double* plane(int c) const {
    return values_.data() + static_cast<std::size_t>(c) * shape_.plane();
  }

  double& at(int c, int y, int x) {
    return values_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
  }
  double at(int c, int y, int x) const {
    return values_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

// An image is a tensor whose nominal range is [0,1]; a latent is whatever the
// codec produces. Under the identity codec the two coincide.
using ImageTensor = Tensor;
using Latent = Tensor;

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double s);
// y += a * x
void axpy(double a, const Tensor& x, Tensor& y);
double dot(const Tensor& a, const Tensor& b);
double mean(const Tensor& a);
double mean_sq_diff(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
Tensor clamp01(const Tensor& a);
bool all_finite(const Tensor& a);
bool all_finite(std::span<const double> v);

}  // namespace tsr
