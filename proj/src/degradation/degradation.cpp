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
#include <numeric>
#include <string>

#include "tsr/degradation.hpp"

namespace tsr::degradation {

namespace fs = std::filesystem;

void DegradationSpec::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) fail(ErrorCode::ValidationError, "degradation.kernel_size must be odd and >= 1");
  if (scale < 1) fail(ErrorCode::ValidationError, "degradation.scale must be >= 1");
  if (!(blur_sigma_range[0] >= 0.0 && blur_sigma_range[0] <= blur_sigma_range[1]))
    fail(ErrorCode::ValidationError, "degradation.blur_sigma_range must satisfy 0 <= lo <= hi");
  if (!(noise_sigma_range[0] >= 0.0 && noise_sigma_range[0] <= noise_sigma_range[1] && noise_sigma_range[1] <= 1.0))
    fail(ErrorCode::ValidationError, "degradation.noise_sigma_range must satisfy 0 <= lo <= hi <= 1");
}

Kernel2D gaussian_kernel(double sigma, int size) {
  if (size < 1 || size % 2 == 0) fail(ErrorCode::EvenSize, "kernel size must be odd, got " + std::to_string(size));
  if (!(sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be >= 0");
  Kernel2D k;
  k.size = size;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  const int r = size / 2;
  if (sigma == 0.0) {
    k.weights[static_cast<std::size_t>(r) * size + r] = 1.0;
    return k;
  }
  double total = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>(y + r) * size + (x + r)] = v;
      total += v;
    }
  for (double& v : k.weights) v /= total;
  return k;
}

Tensor convolve_clamped(const Tensor& img, const Kernel2D& k) {
  const Shape s = img.shape();
  const int r = k.size / 2;
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        // Accumulate relative to the center sample so constants are exact.
        const double ref = src[static_cast<std::size_t>(y) * s.w + x];
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = std::clamp(y + dy, 0, s.h - 1);
          for (int dx = -r; dx <= r; ++dx) {
            const double wgt = k.at(dy + r, dx + r);
            if (wgt == 0.0) continue;
            const int xx = std::clamp(x + dx, 0, s.w - 1);
            acc += wgt * (src[static_cast<std::size_t>(yy) * s.w + xx] - ref);
          }
        }
        dst[static_cast<std::size_t>(y) * s.w + x] = ref + acc;
      }
  }
  return out;
}

Tensor convolve_clamped_adjoint(const Tensor& grad, const Kernel2D& k) {
  const Shape s = grad.shape();
  const int r = k.size / 2;
  const double wsum = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    const double* g = grad.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const double gv = g[static_cast<std::size_t>(y) * s.w + x];
        dst[static_cast<std::size_t>(y) * s.w + x] += (1.0 - wsum) * gv;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = std::clamp(y + dy, 0, s.h - 1);
          for (int dx = -r; dx <= r; ++dx) {
            const double wgt = k.at(dy + r, dx + r);
            if (wgt == 0.0) continue;
            const int xx = std::clamp(x + dx, 0, s.w - 1);
            dst[static_cast<std::size_t>(yy) * s.w + xx] += wgt * gv;
          }
        }
      }
  }
  return out;
}

Tensor apply_operator(const Tensor& x, const Kernel2D& k, int scale) {
  const Tensor blurred = convolve_clamped(x, k);
  if (scale == 1) return blurred;
  return imaging::resize_bicubic(blurred, 1.0 / scale);
}

Tensor apply_operator_adjoint(const Tensor& r, const Kernel2D& k, int scale, int hr_h, int hr_w) {
  Tensor up = r;
  if (scale != 1) {
    const double s = 1.0 / scale;
    const auto rows = imaging::bicubic_taps(hr_h, r.height(), s);
    const auto cols = imaging::bicubic_taps(hr_w, r.width(), s);
    // resize applies rows then columns; the adjoint runs in reverse order.
    up = imaging::resample_axis_adjoint(r, cols, 2, hr_w);
    up = imaging::resample_axis_adjoint(up, rows, 1, hr_h);
  }
  return convolve_clamped_adjoint(up, k);
}

namespace {

double draw(Rng& rng, const std::array<double, 2>& range) {
  if (range[0] == range[1]) return range[0];
  return range[0] + (range[1] - range[0]) * uniform01(rng);
}

}  // namespace

Degraded degrade(const ImageTensor& hr, const DegradationSpec& spec, Rng& rng) {
  spec.validate();
  if (hr.height() % spec.scale != 0 || hr.width() % spec.scale != 0) {
    fail(ErrorCode::ShapeNotDivisible, "image " + to_string(hr.shape()) + " not divisible by scale " +
                                           std::to_string(spec.scale));
  }
  Degraded out;
  out.sample.blur_sigma = draw(rng, spec.blur_sigma_range);
  out.sample.noise_sigma = draw(rng, spec.noise_sigma_range);
  out.sample.kernel = gaussian_kernel(out.sample.blur_sigma, spec.kernel_size);
  out.unclamped = apply_operator(hr, out.sample.kernel, spec.scale);
  if (out.sample.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, out.sample.noise_sigma);
    for (double& v : out.unclamped.values()) v += noise(rng);
  }
  out.lr = clamp01(out.unclamped);
  return out;
}

std::vector<TrainingPair> synth_dataset(const fs::path& corpus_dir, const DegradationSpec& spec,
                                        const imaging::PatchSpec& patch, std::size_t n_pairs) {
  spec.validate();
  patch.validate();
  if (patch.size % spec.scale != 0) {
    fail(ErrorCode::ShapeNotDivisible, "patch size must be divisible by the degradation scale");
  }
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(corpus_dir, ec)) {
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
  }
  if (files.empty()) fail(ErrorCode::EmptyCorpus, "no PNG files in " + corpus_dir.string());
  std::sort(files.begin(), files.end());
  if (n_pairs == 0) return {};

  std::vector<ImageTensor> pool;
  for (const auto& f : files) {
    ImageTensor img = imaging::load_png(f);
    if (img.channels() == 1) {
      ImageTensor rgb(Shape{3, img.height(), img.width()});
      for (int c = 0; c < 3; ++c) std::copy_n(img.plane(0), img.shape().plane(), rgb.plane(c));
      img = std::move(rgb);
    }
    if (img.height() < patch.size || img.width() < patch.size) continue;
    for (auto& p : imaging::crop_patches(img, patch)) pool.push_back(std::move(p));
  }
  if (pool.empty()) fail(ErrorCode::EmptyCorpus, "no image in " + corpus_dir.string() + " fits one patch");

  Rng order_rng(derive_seed(patch.seed, 0x5eed));
  std::vector<std::size_t> order;
  std::vector<TrainingPair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    if (order.empty()) {
      order.resize(pool.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), order_rng);
      std::reverse(order.begin(), order.end());  // consumed from the back
    }
    const std::size_t pick = order.back();
    order.pop_back();
    Rng rng(derive_seed(spec.seed, i));
    Degraded d = degrade(pool[pick], spec, rng);
    pairs.push_back({std::move(d.lr), pool[pick]});
  }
  return pairs;
}

}  // namespace tsr::degradation
