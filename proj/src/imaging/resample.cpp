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
#include <string>

#include "tsr/imaging.hpp"

namespace tsr::imaging {

double bicubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::fabs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

std::vector<ResampleTap> bicubic_taps(int in_n, int out_n, double scale) {
  std::vector<ResampleTap> taps(out_n);
  const double stretch = std::min(scale, 1.0);  // kernel widening when shrinking
  const double support = 2.0 / stretch;
  for (int o = 0; o < out_n; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::ceil(center - support));
    const int hi = static_cast<int>(std::floor(center + support));
    ResampleTap& tap = taps[o];
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double wgt = bicubic_kernel((i - center) * stretch);
      if (wgt == 0.0) continue;
      tap.index.push_back(std::clamp(i, 0, in_n - 1));
      tap.weight.push_back(wgt);
      total += wgt;
    }
    for (double& wgt : tap.weight) wgt /= total;
  }
  return taps;
}

namespace {

// out = x[r] + sum_i w_i (x[i] - x[r]) with r the first tap. Algebraically the
// plain weighted sum (weights sum to one), but constants pass through exactly.
inline double apply_tap(const ResampleTap& tap, const double* src, std::ptrdiff_t stride) {
  const double ref = src[tap.index[0] * stride];
  double acc = 0.0;
  for (std::size_t k = 0; k < tap.index.size(); ++k) acc += tap.weight[k] * (src[tap.index[k] * stride] - ref);
  return ref + acc;
}

}  // namespace

Tensor resample_axis(const Tensor& img, const std::vector<ResampleTap>& taps, int axis) {
  const Shape in = img.shape();
  const int out_n = static_cast<int>(taps.size());
  Shape out_shape = in;
  if (axis == 1) out_shape.h = out_n; else out_shape.w = out_n;
  Tensor out(out_shape);
  for (int c = 0; c < in.c; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    if (axis == 1) {
      for (int o = 0; o < out_n; ++o)
        for (int x = 0; x < in.w; ++x) dst[static_cast<std::size_t>(o) * in.w + x] = apply_tap(taps[o], src + x, in.w);
    } else {
      for (int y = 0; y < in.h; ++y)
        for (int o = 0; o < out_n; ++o)
          dst[static_cast<std::size_t>(y) * out_n + o] = apply_tap(taps[o], src + static_cast<std::size_t>(y) * in.w, 1);
    }
  }
  return out;
}

Tensor resample_axis_adjoint(const Tensor& grad, const std::vector<ResampleTap>& taps, int axis, int in_n) {
  const Shape g = grad.shape();
  Shape in_shape = g;
  if (axis == 1) in_shape.h = in_n; else in_shape.w = in_n;
  Tensor out(in_shape);
  const int out_n = static_cast<int>(taps.size());
  for (int c = 0; c < g.c; ++c) {
    const double* src = grad.plane(c);
    double* dst = out.plane(c);
    auto scatter = [&](const ResampleTap& tap, double gv, double* base, std::ptrdiff_t stride) {
      double wsum = 0.0;
      for (std::size_t k = 0; k < tap.index.size(); ++k) {
        base[tap.index[k] * stride] += tap.weight[k] * gv;
        wsum += tap.weight[k];
      }
      base[tap.index[0] * stride] += (1.0 - wsum) * gv;
    };
    if (axis == 1) {
      for (int o = 0; o < out_n; ++o)
        for (int x = 0; x < g.w; ++x) scatter(taps[o], src[static_cast<std::size_t>(o) * g.w + x], dst + x, g.w);
    } else {
      for (int y = 0; y < g.h; ++y)
        for (int o = 0; o < out_n; ++o)
          scatter(taps[o], src[static_cast<std::size_t>(y) * out_n + o], dst + static_cast<std::size_t>(y) * in_n, 1);
    }
  }
  return out;
}

ImageTensor resize_bicubic(const ImageTensor& img, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorCode::InvalidArgument, "resize scale must be positive");
  const int out_h = static_cast<int>(std::lround(img.height() * scale));
  const int out_w = static_cast<int>(std::lround(img.width() * scale));
  if (out_h < 1 || out_w < 1) {
    fail(ErrorCode::DegenerateOutput, "resize to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const Tensor rows = resample_axis(img, bicubic_taps(img.height(), out_h, scale), 1);
  return resample_axis(rows, bicubic_taps(img.width(), out_w, scale), 2);
}

void PatchSpec::validate() const {
  if (size < 8) fail(ErrorCode::ValidationError, "patch.size must be >= 8");
  if (stride < 1) fail(ErrorCode::ValidationError, "patch.stride must be >= 1");
}

std::size_t patch_count(int h, int w, const PatchSpec& spec) {
  if (spec.size > h || spec.size > w) return 0;
  const std::size_t ny = static_cast<std::size_t>((h - spec.size) / spec.stride + 1);
  const std::size_t nx = static_cast<std::size_t>((w - spec.size) / spec.stride + 1);
  return ny * nx;
}

std::vector<ImageTensor> crop_patches(const ImageTensor& img, const PatchSpec& spec) {
  spec.validate();
  if (spec.size > std::min(img.height(), img.width())) {
    fail(ErrorCode::PatchTooLarge, "patch size " + std::to_string(spec.size) + " exceeds image " +
                                       to_string(img.shape()));
  }
  std::vector<ImageTensor> out;
  out.reserve(patch_count(img.height(), img.width(), spec));
  for (int y0 = 0; y0 + spec.size <= img.height(); y0 += spec.stride) {
    for (int x0 = 0; x0 + spec.size <= img.width(); x0 += spec.stride) {
      ImageTensor p(Shape{img.channels(), spec.size, spec.size});
      for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < spec.size; ++y)
          std::copy_n(img.plane(c) + static_cast<std::size_t>(y0 + y) * img.width() + x0, spec.size,
                      p.plane(c) + static_cast<std::size_t>(y) * spec.size);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace tsr::imaging
