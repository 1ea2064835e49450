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

#include "tsr/diffusion.hpp"

#include <cmath>
#include <string>

#include "tsr/imaging.hpp"

namespace tsr::diffusion {

Timestep::Timestep(double t) : t_(t) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::InvalidArgument, "timestep must lie in [0,1], got " + std::to_string(t));
}

Latent add_noise(const Latent& z0, Timestep t, const Latent& eps) {
  require_same_shape(z0, eps, "add_noise");
  Latent out = z0;
  axpy(t.value(), eps, out);
  return out;
}

Latent step_noise(const Latent& z_t, Timestep t, Timestep t_next, const Latent& eps, StepRule rule) {
  if (t_next.value() < t.value()) {
    fail(ErrorCode::ReversedInterval,
         "step_noise needs t' >= t, got t=" + std::to_string(t.value()) + " t'=" + std::to_string(t_next.value()));
  }
  require_same_shape(z_t, eps, "step_noise");
  const double mult = rule == StepRule::Delta ? t_next.value() - t.value() : t_next.value();
  Latent out = z_t;
  axpy(mult, eps, out);
  return out;
}

Restored student_restore(NetHandle student, const nets::Codec& codec, const ImageTensor& x_lr, int scale,
                         std::span<const double> c, nets::NetCache* cache) {
  if (scale < 1) fail(ErrorCode::InvalidArgument, "scale must be >= 1");
  Restored r;
  const ImageTensor up = scale == 1 ? x_lr : imaging::resize_bicubic(x_lr, static_cast<double>(scale));
  r.z1 = nets::encode(codec, up);
  r.z0s = r.z1;
  axpy(1.0, student(r.z1, kRestoreTime, c, cache), r.z0s);
  r.x0 = nets::decode(codec, r.z0s);
  return r;
}

Timestep sample_timestep(Rng& rng) { return Timestep(uniform01(rng)); }

std::pair<Timestep, Timestep> sample_timestep_pair(Rng& rng) {
  for (;;) {
    double a = uniform01(rng), b = uniform01(rng);
    if (a > b) std::swap(a, b);
    if (a > 0.0 && a < b) return {Timestep(a), Timestep(b)};
  }
}

Latent knob_latent(NetHandle stage2, const Latent& z0, Timestep t, std::span<const double> c, int steps) {
  if (steps < 1) fail(ErrorCode::InvalidArgument, "knob integration needs at least one step");
  if (t.value() == 0.0) return z0;
  Latent z = z0;
  const double h = t.value() / steps;
  for (int k = 0; k < steps; ++k) {
    const double tk = steps == 1 ? 0.0 : std::min(1.0, k * h);
    axpy(h, stage2(z, tk, c), z);
  }
  return z;
}

ImageTensor sr_at_t(NetHandle stage2, NetHandle stage1, const nets::Codec& codec, const ImageTensor& x_lr, int scale,
                    Timestep t, std::span<const double> c, int steps) {
  Restored r = student_restore(stage1, codec, x_lr, scale, c);
  if (t.value() == 0.0) return r.x0;
  return nets::decode(codec, knob_latent(stage2, r.z0s, t, c, steps));
}

}  // namespace tsr::diffusion
