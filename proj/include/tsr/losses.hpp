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
#include <vector>

#include "tsr/degradation.hpp"
#include "tsr/diffusion.hpp"
#include "tsr/layers.hpp"
#include "tsr/nets.hpp"

namespace tsr::losses {

struct LossWeights {
  double lambda_l2 = 1.0;
  double lambda_lp = 2.0;
  double lambda_fl = 2.0;
  double lambda_rn = 1.0;
  double gamma_time = 5.5;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Fixed random convolutional pyramid standing in for a learned perceptual
// metric. Each level compares local band energy, sqrt(pre^2 + delta), pooled
// over 4x4 cells and unit-normalized across channels, so detail that is
// plausible but slightly misplaced costs little while lost detail costs a lot.
class PercepExtractor {
 public:
  explicit PercepExtractor(std::uint64_t seed = 0x5ee9ULL, int channels = 3);

  int levels() const { return static_cast<int>(widths_.size()); }
  int channels() const { return channels_; }

  struct Cache {
    std::vector<Tensor> in;    // input of each level's conv
    std::vector<Tensor> pre;   // conv output before the activation
    std::vector<Tensor> act;   // band energy
    std::vector<Tensor> pool;  // energy after the first 2x2 pooling
    std::vector<Tensor> feat;  // normalized features
    std::vector<Tensor> norm;  // per-pixel norms, one channel
  };

  std::vector<Tensor> features(const ImageTensor& x, Cache* cache = nullptr) const;
  // Gradient w.r.t. the input image given gradients on the normalized features.
  Tensor features_backward(const Cache& cache, const std::vector<Tensor>& dfeat) const;

  // Smallest height/width accepted.
  int min_size() const { return 4 << (levels() - 1); }

  // Spatial means of the band energies, used as the set-level embedding.
  std::vector<double> embedding(const ImageTensor& x) const;

  const ParamSet& params() const { return params_; }

 private:
  int channels_;
  std::vector<int> widths_;
  ParamSet params_;
};

// Mean over levels of the mean squared difference of normalized features.
double percep_dist(const PercepExtractor& ex, const ImageTensor& a, const ImageTensor& b, Tensor* grad_a = nullptr);

// lambda_l2 * MSE + lambda_lp * percep_dist
double rec_loss(const ImageTensor& x0, const ImageTensor& gt, const LossWeights& w, const PercepExtractor& ex,
                Tensor* grad_x0 = nullptr);

using diffusion::NetHandle;

// Gradient sinks for a loss that depends on student parameters. Gradients
// are accumulated (not overwritten) and multiplied by `weight`.
struct StudentGrads {
  ParamSet* d_params = nullptr;
  Tensor* d_z_ts = nullptr;
  double weight = 1.0;
};

// |eT(z_ts) - eS(z_ts)|^2 + gamma |eT(z_ts) - eT(z_t)|^2, both as element
// means. Teacher weights are frozen; the teacher is still differentiated with
// respect to its input z_ts.
double distill_loss(NetHandle teacher, NetHandle student, const Latent& z_t, const Latent& z_ts, double t,
                    std::span<const double> c, double gamma_time, StudentGrads grads = {});

struct Stage1Nets {
  NetHandle student;
  NetHandle teacher_f;  // fidelity teacher's eps-net
  NetHandle teacher_r;  // realness teacher's eps-net
  const nets::Codec* codec;
  int scale = 4;
  double noise_std = 0.1;
  std::vector<double> cond;
};

struct Stage1Terms {
  double total = 0.0;
  double rec = 0.0;
  double fl = 0.0;
  double rn = 0.0;
};

// Batch mean of rec + lambda_rn * L_rn + lambda_fl * L_fl. Draws one t and one
// shared noise tensor per item from rng.
Stage1Terms stage1_loss(std::span<const degradation::TrainingPair> batch, const Stage1Nets& nets,
                        const LossWeights& w, const PercepExtractor& ex, Rng& rng, ParamSet* d_student = nullptr);

// eps_T(z, t, c) for a frozen teacher field.
using EpsField = std::function<Tensor(const Latent&, double, std::span<const double>)>;

EpsField field_of(NetHandle net);
EpsField constant_field(Tensor v);

// Teacher evaluated at z0 for both times, or (variant) at z_t and z_t'.
enum class ControlForm { AtZ0, AtNoised };

double control_loss(const EpsField& teacher, NetHandle student, const Latent& z0, double t, double t_next,
                    std::span<const double> c, ControlForm form = ControlForm::AtZ0, ParamSet* d_student = nullptr,
                    double weight = 1.0);

double stage2_loss(std::span<const Latent> batch_z0, const EpsField& teacher, NetHandle student, Rng& rng,
                   std::span<const double> c, ControlForm form = ControlForm::AtZ0, ParamSet* d_student = nullptr);

}  // namespace tsr::losses
