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

// Data-parallel inner loops. Each kernel exists as a portable scalar reference
// and, where the target supports it, an AVX2/FMA or NEON variant. The variant
// is picked once at startup from CPUID; all variants are equivalence-tested
// against the scalar table.
namespace tsr::kernels {

struct AdamCoeffs {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double bias_correction1 = 1.0;  // 1 - beta1^step
  double bias_correction2 = 1.0;  // 1 - beta2^step
};

struct KernelTable {
  const char* name;

  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  // sum_i x[i] * y[i]
  double (*dot)(std::size_t n, const double* x, const double* y);

  // sum_i (x[i] - y[i])^2
  double (*sq_dist)(std::size_t n, const double* x, const double* y);

  // out[j] += sum_k w[k] * in[j + off[k]]  for j in [0, n)
  void (*stencil_acc)(std::size_t n, int taps, const double* w,
                      const std::ptrdiff_t* off, const double* in, double* out);

  // dw[k] += sum_j dout[j] * in[j + off[k]]  for k in [0, taps)
  void (*stencil_wgrad)(std::size_t n, int taps, const std::ptrdiff_t* off,
                        const double* dout, const double* in, double* dw);

  // Decoupled-weight-decay Adam update over n parameters.
  void (*adamw)(std::size_t n, double* p, const double* g, double* m, double* v,
                const AdamCoeffs& c);
};

constexpr int kMaxTaps = 9;

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The table used by the rest of the library. Setting TSR_KERNELS=scalar in the
// environment forces the reference path.
const KernelTable& active();

}  // namespace tsr::kernels
