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

// Built only for aarch64 targets.

#include <arm_neon.h>

#include <cmath>

#include "tsr/kernels.hpp"

namespace tsr::kernels {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  float64x2_t s0 = vdupq_n_f64(0.0);
  float64x2_t s1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 = vfmaq_f64(s0, vld1q_f64(x + i), vld1q_f64(y + i));
    s1 = vfmaq_f64(s1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sq_dist(std::size_t n, const double* x, const double* y) {
  float64x2_t s0 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    s0 = vfmaq_f64(s0, d, d);
  }
  double s = vaddvq_f64(s0);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void stencil_acc(std::size_t n, int taps, const double* w, const std::ptrdiff_t* off,
                 const double* in, double* out) {
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t acc = vld1q_f64(out + j);
    for (int k = 0; k < taps; ++k) acc = vfmaq_n_f64(acc, vld1q_f64(in + j + off[k]), w[k]);
    vst1q_f64(out + j, acc);
  }
  for (; j < n; ++j) {
    double acc = out[j];
    for (int k = 0; k < taps; ++k) acc += w[k] * in[static_cast<std::ptrdiff_t>(j) + off[k]];
    out[j] = acc;
  }
}

void stencil_wgrad(std::size_t n, int taps, const std::ptrdiff_t* off, const double* dout,
                   const double* in, double* dw) {
  for (int k = 0; k < taps; ++k) dw[k] += dot(n, dout, in + off[k]);
}

void adamw(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c) {
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi = vaddq_f64(vmulq_n_f64(vld1q_f64(m + i), c.beta1), vmulq_n_f64(gi, one_m_b1));
    const float64x2_t vi =
        vaddq_f64(vmulq_n_f64(vld1q_f64(v + i), c.beta2), vmulq_n_f64(vmulq_f64(gi, gi), one_m_b2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t mhat = vdivq_f64(mi, vdupq_n_f64(c.bias_correction1));
    const float64x2_t vhat = vdivq_f64(vi, vdupq_n_f64(c.bias_correction2));
    const float64x2_t pi = vld1q_f64(p + i);
    const float64x2_t step = vaddq_f64(vdivq_f64(mhat, vaddq_f64(vsqrtq_f64(vhat), vdupq_n_f64(c.eps))),
                                       vmulq_n_f64(pi, c.weight_decay));
    vst1q_f64(p + i, vsubq_f64(pi, vmulq_n_f64(step, c.lr)));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_m_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_m_b2 * (g[i] * g[i]);
    const double mhat = m[i] / c.bias_correction1;
    const double vhat = v[i] / c.bias_correction2;
    p[i] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
  }
}

}  // namespace

const KernelTable& neon_kernels() {
  static const KernelTable table{"neon", axpy, dot, sq_dist, stencil_acc, stencil_wgrad, adamw};
  return table;
}

}  // namespace tsr::kernels
