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

#include "tsr/kernels.hpp"
#include "tsr/layers.hpp"

namespace tsr {

Param& ParamSet::add(std::string name, std::vector<int> shape, double fill) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return add(Param{std::move(name), std::move(shape), std::vector<double>(n, fill)});
}

Param& ParamSet::add(Param p) {
  if (index_.count(p.name) != 0) fail(ErrorCode::InvalidArgument, "duplicate parameter " + p.name);
  index_[p.name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::InvalidArgument, "unknown parameter " + name);
  return params_[it->second];
}

const Param& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::InvalidArgument, "unknown parameter " + name);
  return params_[it->second];
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& p : params_) out.add(Param{p.name, p.shape, std::vector<double>(p.value.size(), 0.0)});
  return out;
}

void ParamSet::fill(double v) {
  for (auto& p : params_) std::fill(p.value.begin(), p.value.end(), v);
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape) return false;
  }
  return true;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  if (!same_layout(other)) fail(ErrorCode::ShapeMismatch, "parameter layouts differ");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    kernels::active().axpy(params_[i].value.size(), s, other.params_[i].value.data(), params_[i].value.data());
  }
}

bool ParamSet::all_finite() const {
  for (const auto& p : params_)
    for (double v : p.value)
      if (!std::isfinite(v)) return false;
  return true;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].value != other.params_[i].value) return false;
  return true;
}

namespace layers {
namespace {

// Zero-padded copy of each channel plane with a guard band so that every
// stencil offset stays in bounds.
struct Padded {
  int c = 0, h = 0, w = 0, pad = 0;
  int wp = 0;           // padded row stride
  std::size_t guard = 0;
  std::size_t plane = 0;  // elements per padded plane, guards included
  std::vector<double> buf;

  Padded(int c_, int h_, int w_, int pad_) : c(c_), h(h_), w(w_), pad(pad_) {
    wp = w + 2 * pad;
    guard = static_cast<std::size_t>(pad) + 8;
    plane = static_cast<std::size_t>(h + 2 * pad) * wp + 2 * guard;
    buf.assign(plane * c, 0.0);
  }

  // Start of the first interior row (row `pad`, column 0) of channel ch.
  double* rows(int ch) { return buf.data() + ch * plane + guard + static_cast<std::size_t>(pad) * wp; }
  const double* rows(int ch) const {
    return buf.data() + ch * plane + guard + static_cast<std::size_t>(pad) * wp;
  }
  std::size_t span() const { return static_cast<std::size_t>(h) * wp; }

  static Padded from(const Tensor& t, int pad) {
    Padded p(t.channels(), t.height(), t.width(), pad);
    for (int ch = 0; ch < p.c; ++ch) {
      const double* src = t.plane(ch);
      double* dst = p.rows(ch);
      for (int y = 0; y < p.h; ++y) std::copy_n(src + static_cast<std::size_t>(y) * p.w, p.w, dst + static_cast<std::size_t>(y) * p.wp + pad);
    }
    return p;
  }

  void extract(int ch, double* dst) const {
    const double* src = rows(ch);
    for (int y = 0; y < h; ++y) std::copy_n(src + static_cast<std::size_t>(y) * wp + pad, w, dst + static_cast<std::size_t>(y) * w);
  }
};

std::vector<std::ptrdiff_t> tap_offsets(int k, int wp, bool negate) {
  const int r = k / 2;
  std::vector<std::ptrdiff_t> off;
  off.reserve(static_cast<std::size_t>(k) * k);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const std::ptrdiff_t o = static_cast<std::ptrdiff_t>(dy) * wp + dx;
      off.push_back(negate ? -o : o);
    }
  return off;
}

}  // namespace

Tensor conv2d(const Tensor& x, std::span<const double> w, std::span<const double> b, int out_c, int k) {
  const int in_c = x.channels();
  const int taps = k * k;
  if (w.size() != static_cast<std::size_t>(out_c) * in_c * taps) {
    fail(ErrorCode::ShapeMismatch, "conv2d weight size does not match " + std::to_string(out_c) + "x" +
                                       std::to_string(in_c) + "x" + std::to_string(k) + "x" + std::to_string(k));
  }
  const auto& kt = kernels::active();
  const Padded xp = Padded::from(x, k / 2);
  const auto off = tap_offsets(k, xp.wp, false);
  Padded yp(out_c, x.height(), x.width(), k / 2);
  const std::size_t n = xp.span();
  for (int o = 0; o < out_c; ++o) {
    double* acc = yp.rows(o);
    if (!b.empty()) std::fill_n(acc, n, b[o]);
    for (int i = 0; i < in_c; ++i) {
      kt.stencil_acc(n, taps, w.data() + (static_cast<std::size_t>(o) * in_c + i) * taps, off.data(), xp.rows(i), acc);
    }
  }
  Tensor y(Shape{out_c, x.height(), x.width()});
  for (int o = 0; o < out_c; ++o) yp.extract(o, y.plane(o));
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, int out_c, int k,
                     std::span<double> dw, std::span<double> db, Tensor* dx) {
  const int in_c = x.channels();
  const int taps = k * k;
  const auto& kt = kernels::active();
  const Padded xp = Padded::from(x, k / 2);
  const Padded gp = Padded::from(dy, k / 2);
  const std::size_t n = xp.span();
  if (!db.empty()) {
    for (int o = 0; o < out_c; ++o) {
      double s = 0.0;
      for (double v : std::span(dy.plane(o), dy.shape().plane())) s += v;
      db[o] += s;
    }
  }
  if (!dw.empty()) {
    const auto off = tap_offsets(k, xp.wp, false);
    for (int o = 0; o < out_c; ++o)
      for (int i = 0; i < in_c; ++i)
        kt.stencil_wgrad(n, taps, off.data(), gp.rows(o), xp.rows(i), dw.data() + (static_cast<std::size_t>(o) * in_c + i) * taps);
  }
  if (dx != nullptr) {
    const auto off = tap_offsets(k, xp.wp, true);
    Padded dp(in_c, x.height(), x.width(), k / 2);
    for (int i = 0; i < in_c; ++i) {
      double* acc = dp.rows(i);
      for (int o = 0; o < out_c; ++o) {
        kt.stencil_acc(n, taps, w.data() + (static_cast<std::size_t>(o) * in_c + i) * taps, off.data(), gp.rows(o), acc);
      }
    }
    *dx = Tensor(x.shape());
    for (int i = 0; i < in_c; ++i) dp.extract(i, dx->plane(i));
  }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

Tensor silu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = silu(v);
  return y;
}

Tensor silu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= silu_grad(x.data()[i]);
  return dx;
}

Tensor avg_pool2(const Tensor& x) {
  const int h = x.height() / 2, w = x.width() / 2;
  Tensor y(Shape{x.channels(), h, w});
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx)
        y.at(c, yy, xx) = 0.25 * (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                                  x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1));
  return y;
}

Tensor avg_pool2_backward(const Tensor& dy, const Shape& in_shape) {
  Tensor dx(in_shape);
  for (int c = 0; c < dy.channels(); ++c)
    for (int yy = 0; yy < dy.height(); ++yy)
      for (int xx = 0; xx < dy.width(); ++xx) {
        const double g = 0.25 * dy.at(c, yy, xx);
        dx.at(c, 2 * yy, 2 * xx) += g;
        dx.at(c, 2 * yy, 2 * xx + 1) += g;
        dx.at(c, 2 * yy + 1, 2 * xx) += g;
        dx.at(c, 2 * yy + 1, 2 * xx + 1) += g;
      }
  return dx;
}

Tensor space_to_depth(const Tensor& x, int f) {
  if (x.height() % f != 0 || x.width() % f != 0) {
    fail(ErrorCode::ShapeNotDivisible, "spatial dims " + to_string(x.shape()) + " not divisible by " + std::to_string(f));
  }
  const int h = x.height() / f, w = x.width() / f;
  Tensor y(Shape{x.channels() * f * f, h, w});
  for (int c = 0; c < x.channels(); ++c)
    for (int dy = 0; dy < f; ++dy)
      for (int dx = 0; dx < f; ++dx) {
        const int oc = (c * f + dy) * f + dx;
        for (int yy = 0; yy < h; ++yy)
          for (int xx = 0; xx < w; ++xx) y.at(oc, yy, xx) = x.at(c, yy * f + dy, xx * f + dx);
      }
  return y;
}

Tensor depth_to_space(const Tensor& x, int f) {
  const int c_out = x.channels() / (f * f);
  Tensor y(Shape{c_out, x.height() * f, x.width() * f});
  for (int c = 0; c < c_out; ++c)
    for (int dy = 0; dy < f; ++dy)
      for (int dx = 0; dx < f; ++dx) {
        const int ic = (c * f + dy) * f + dx;
        for (int yy = 0; yy < x.height(); ++yy)
          for (int xx = 0; xx < x.width(); ++xx) y.at(c, yy * f + dy, xx * f + dx) = x.at(ic, yy, xx);
      }
  return y;
}

void init_normal(Rng& rng, std::span<double> w, double stddev) { fill_normal(rng, w, stddev); }

}  // namespace layers
}  // namespace tsr
