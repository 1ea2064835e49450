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

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tsr/imaging.hpp"
#include "tsr/random.hpp"
#include "tsr/tensor.hpp"

namespace tsr::degradation {

struct DegradationSpec {
  std::array<double, 2> blur_sigma_range{0.2, 1.2};
  int kernel_size = 7;
  int scale = 4;
  std::array<double, 2> noise_sigma_range{0.0, 0.02};
  std::uint64_t seed = 0;

  void validate() const;
};

// Square, normalized, non-negative blur kernel.
struct Kernel2D {
  int size = 1;
  std::vector<double> weights{1.0};

  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * size + x]; }
};

struct DegradationSample {
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  Kernel2D kernel;
};

struct Degraded {
  ImageTensor lr;
  DegradationSample sample;
  Tensor unclamped;  // blur -> downsample -> noise, before the final clamp
};

struct TrainingPair {
  ImageTensor lr;
  ImageTensor gt;
};

Kernel2D gaussian_kernel(double sigma, int size);

// Convolution with clamp-to-edge borders, and its exact adjoint.
Tensor convolve_clamped(const Tensor& img, const Kernel2D& k);
Tensor convolve_clamped_adjoint(const Tensor& grad, const Kernel2D& k);

// The linear part of the degradation, A = downsample o blur, and its adjoint.
Tensor apply_operator(const Tensor& x, const Kernel2D& k, int scale);
Tensor apply_operator_adjoint(const Tensor& r, const Kernel2D& k, int scale, int hr_h, int hr_w);

Degraded degrade(const ImageTensor& hr, const DegradationSpec& spec, Rng& rng);

std::vector<TrainingPair> synth_dataset(const std::filesystem::path& corpus_dir, const DegradationSpec& spec,
                                        const imaging::PatchSpec& patch, std::size_t n_pairs);

// Writes a procedural corpus of natural-looking toy images (smooth shading,
// hard-edged shapes, oriented texture) for use when no photographs are at hand.
void make_toy_corpus(const std::filesystem::path& dir, int n_images, int size, std::uint64_t seed);
ImageTensor toy_image(int size, std::uint64_t seed);

}  // namespace tsr::degradation
