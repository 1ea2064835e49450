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
#include <functional>
#include <span>

#include "tsr/nets.hpp"
#include "tsr/random.hpp"
#include "tsr/tensor.hpp"

namespace tsr::diffusion {

// A diffusion time in [0,1]. Construction validates.
class Timestep {
 public:
  explicit Timestep(double t);
  double value() const { return t_; }
  operator double() const { return t_; }

 private:
  double t_;
};

// Time at which the one-step student restores: the upsampled LR latent sits
// at the noisy end of the flow.
inline constexpr double kRestoreTime = 1.0;

struct FlowState {
  Latent z0;
  double t = 0.0;
  Latent eps;
};

// z_t = z0 + t * eps
Latent add_noise(const Latent& z0, Timestep t, const Latent& eps);

enum class StepRule {
  Delta,       // z_t' = z_t + (t' - t) * eps; composes with add_noise
  TimeScaled,  // z_t' = z_t + t' * eps; the listed algorithm's variant
};

Latent step_noise(const Latent& z_t, Timestep t, Timestep t_next, const Latent& eps, StepRule rule = StepRule::Delta);

// A network viewed through an explicit weight set (base or adapted weights).
struct NetHandle {
  const nets::NetConfig* config;
  const ParamSet* params;

  Tensor operator()(const Latent& z, double t, std::span<const double> c, nets::NetCache* cache = nullptr) const {
    return nets::forward_with(*config, *params, z, t, c, cache);
  }
};

inline NetHandle handle(const nets::DenoiserNet& net) { return {&net.config, &net.params}; }

struct Restored {
  Latent z1;   // encoded bicubic upsample of the LR input
  Latent z0s;  // z1 + net(z1, 1, c)
  ImageTensor x0;
};

Restored student_restore(NetHandle student, const nets::Codec& codec, const ImageTensor& x_lr, int scale,
                         std::span<const double> c = {}, nets::NetCache* cache = nullptr);

Timestep sample_timestep(Rng& rng);
// 0 < t < t' < 1, uniform on the triangle.
std::pair<Timestep, Timestep> sample_timestep_pair(Rng& rng);

// Latent on the controllable path: z0 + t * eps2(z0, 0, c) for one step; with
// steps > 1, explicit Euler on [0, t] with the field evaluated at (z_k, t_k).
Latent knob_latent(NetHandle stage2, const Latent& z0, Timestep t, std::span<const double> c, int steps = 1);

ImageTensor sr_at_t(NetHandle stage2, NetHandle stage1, const nets::Codec& codec, const ImageTensor& x_lr, int scale,
                    Timestep t, std::span<const double> c = {}, int steps = 1);

}  // namespace tsr::diffusion
