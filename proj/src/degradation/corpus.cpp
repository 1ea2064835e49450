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
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tsr/degradation.hpp"

namespace tsr::degradation {

namespace {

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

ImageTensor toy_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  auto u = [&] { return uniform01(rng); };
  ImageTensor img(Shape{3, size, size});

  std::array<double, 3> c0{u(), u(), u()};
  std::array<double, 3> c1{u(), u(), u()};
  const double gang = 2.0 * std::numbers::pi * u();
  const double gx = std::cos(gang), gy = std::sin(gang);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double s = 0.5 + 0.5 * ((x - size / 2.0) * gx + (y - size / 2.0) * gy) / size;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = c0[c] * (1 - s) + c1[c] * s;
    }

  const int n_shapes = 4 + static_cast<int>(u() * 6);
  for (int k = 0; k < n_shapes; ++k) {
    const bool ellipse = u() < 0.5;
    const double cx = u() * size, cy = u() * size;
    const double rx = (0.08 + 0.3 * u()) * size, ry = (0.08 + 0.3 * u()) * size;
    const double rot = std::numbers::pi * u();
    const double cr = std::cos(rot), sr = std::sin(rot);
    std::array<double, 3> col{u(), u(), u()};
    std::array<double, 3> col2{u(), u(), u()};
    const bool textured = u() < 0.6;
    const double freq = 0.25 + 0.9 * u();  // cycles per pixel * 2pi below
    const double tang = std::numbers::pi * u();
    const double tx = std::cos(tang), ty = std::sin(tang);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double lx = dx * cr + dy * sr, ly = -dx * sr + dy * cr;
        double dist;  // signed distance-ish, negative inside
        if (ellipse) {
          const double q = std::sqrt((lx * lx) / (rx * rx) + (ly * ly) / (ry * ry));
          dist = (q - 1.0) * std::min(rx, ry);
        } else {
          dist = std::max(std::fabs(lx) - rx, std::fabs(ly) - ry);
        }
        const double cover = 1.0 - smoothstep(-0.6, 0.6, dist);
        if (cover <= 0.0) continue;
        double tex = 0.0;
        if (textured) tex = 0.5 + 0.5 * std::sin(freq * (x * tx + y * ty) * 2.0);
        for (int c = 0; c < 3; ++c) {
          const double v = textured ? col[c] * (1 - tex) + col2[c] * tex : col[c];
          double& p = img.at(c, y, x);
          p = p * (1 - cover) + v * cover;
        }
      }
  }

  // Fine grain so that realness has something to reproduce.
  std::normal_distribution<double> grain(0.0, 0.02);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double g = grain(rng);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(img.at(c, y, x) + g, 0.0, 1.0);
    }
  // Snap to the 8-bit grid so files round-trip exactly.
  for (double& v : img.values()) v = imaging::quantize_byte(v) / 255.0;
  return img;
}

void make_toy_corpus(const std::filesystem::path& dir, int n_images, int size, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < n_images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%04d.png", i);
    imaging::save_png(toy_image(size, derive_seed(seed, static_cast<std::uint64_t>(i))), dir / name);
  }
}

}  // namespace tsr::degradation
