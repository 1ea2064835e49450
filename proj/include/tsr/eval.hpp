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

#include <span>
#include <vector>

#include "tsr/degradation.hpp"
#include "tsr/diffusion.hpp"
#include "tsr/losses.hpp"
#include "tsr/nets.hpp"

namespace tsr::eval {

inline constexpr double kPsnrCap = 99.0;

struct MetricRow {
  double key = 0.0;  // t or alpha
  double psnr = 0.0;
  double ssim = 0.0;
  double percep = 0.0;
  double toy_fid = 0.0;

  bool operator==(const MetricRow&) const = default;
};

// Peak 1.0; identical images report the cap.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Gaussian window (11 taps, sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, mean over
// valid windows and channels.
double ssim(const ImageTensor& a, const ImageTensor& b);

// Frechet distance between Gaussians fitted to two sets of row vectors.
double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

double toy_fid(std::span<const ImageTensor> set_a, std::span<const ImageTensor> set_b,
               const losses::PercepExtractor& ex);

// alpha * x_f + (1 - alpha) * x_r, clamped to [0,1]
ImageTensor linear_blend(const ImageTensor& x_f, const ImageTensor& x_r, double alpha);

// Per-set averages of psnr/ssim/percep against gt plus toy_fid of the set.
MetricRow measure(double key, std::span<const ImageTensor> outputs, std::span<const ImageTensor> gt,
                  const losses::PercepExtractor& ex);

std::vector<MetricRow> sweep_alpha(std::span<const ImageTensor> x_f, std::span<const ImageTensor> x_r,
                                   std::span<const ImageTensor> gt, std::span<const double> grid,
                                   const losses::PercepExtractor& ex);

std::vector<double> default_t_grid();
std::vector<double> default_alpha_grid();

struct KnobModels {
  diffusion::NetHandle stage2;
  diffusion::NetHandle stage1;
  const nets::Codec* codec;
  int scale = 4;
  std::vector<double> cond;
  int steps = 1;
};

std::vector<MetricRow> sweep_t(const KnobModels& models, std::span<const ImageTensor> lr_set,
                               std::span<const ImageTensor> gt_set, std::span<const double> t_grid,
                               const losses::PercepExtractor& ex);

// x <- x - rho * A^T (A x - y) with A = blur then downsample.
ImageTensor data_consistency_refine(const ImageTensor& x0, const ImageTensor& y,
                                    const degradation::DegradationSample& sample, int scale, double rho, int iters);

// |A x - y| (root of the summed squares)
double consistency_residual(const ImageTensor& x, const ImageTensor& y, const degradation::DegradationSample& sample,
                            int scale);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace tsr::eval
