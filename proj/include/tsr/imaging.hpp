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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsr/tensor.hpp"

namespace tsr::imaging {

struct PatchSpec {
  int size = 32;
  int stride = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

ImageTensor load_png(const std::filesystem::path& path);
void save_png(const ImageTensor& img, const std::filesystem::path& path);

// In-memory codecs shared by the file functions and the HTTP service.
ImageTensor decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageTensor& img);

// round-half-up to a byte, clamped to [0,255]
std::uint8_t quantize_byte(double v);

// Separable bicubic (a = -0.5) with clamped borders. Downscaling widens the
// kernel by 1/scale so that it also acts as an anti-aliasing filter.
ImageTensor resize_bicubic(const ImageTensor& img, double scale);

// One output sample of a 1-D resampler: taps into the input plus their weights.
struct ResampleTap {
  std::vector<int> index;
  std::vector<double> weight;
};

// Tap table used by resize_bicubic along one axis. Exposed so that linear
// operators built from resampling (and their adjoints) share one definition.
std::vector<ResampleTap> bicubic_taps(int in_n, int out_n, double scale);

// Applies a table along rows (axis = 1, height) or columns (axis = 2, width).
Tensor resample_axis(const Tensor& img, const std::vector<ResampleTap>& taps, int axis);
// Exact adjoint of resample_axis for the same table.
Tensor resample_axis_adjoint(const Tensor& grad, const std::vector<ResampleTap>& taps, int axis,
                             int in_n);

std::vector<ImageTensor> crop_patches(const ImageTensor& img, const PatchSpec& spec);

// Count of patches crop_patches yields for an h x w image.
std::size_t patch_count(int h, int w, const PatchSpec& spec);

double bicubic_kernel(double x);

}  // namespace tsr::imaging
