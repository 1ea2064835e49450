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

#include <cmath>

#include "tsr/kernels.hpp"

namespace tsr::kernels {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sq_dist(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void stencil_acc(std::size_t n, int taps, const double* w, const std::ptrdiff_t* off,
                 const double* in, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = out[j];
    for (int k = 0; k < taps; ++k) acc += w[k] * in[static_cast<std::ptrdiff_t>(j) + off[k]];
    out[j] = acc;
  }
}

void stencil_wgrad(std::size_t n, int taps, const std::ptrdiff_t* off, const double* dout,
                   const double* in, double* dw) {
  for (int k = 0; k < taps; ++k) {
    const double* src = in + off[k];
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += dout[j] * src[j];
    dw[k] += s;
  }
}

void adamw(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c) {
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_m_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_m_b2 * (g[i] * g[i]);
    const double mhat = m[i] / c.bias_correction1;
    const double vhat = v[i] / c.bias_correction2;
    p[i] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", axpy, dot, sq_dist, stencil_acc, stencil_wgrad, adamw};
  return table;
}

}  // namespace tsr::kernels
