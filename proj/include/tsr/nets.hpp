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
#include <span>
#include <string>
#include <vector>

#include "tsr/layers.hpp"
#include "tsr/tensor.hpp"

namespace tsr::nets {

// Conditioning vector c. An empty vector means "all zeros".
using Conditioning = std::vector<double>;

struct NetConfig {
  int channels = 3;      // latent channels in and out
  int width = 16;        // hidden channels
  int depth = 2;         // residual blocks
  int t_embed_dim = 16;  // sinusoidal timestep embedding size (even)
  int cond_dim = 4;      // size of the conditioning vector

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

// eps(z, t, c): residual CNN whose blocks are modulated per channel by an
// affine function of the timestep embedding. The output head starts at zero.
struct DenoiserNet {
  NetConfig config;
  ParamSet params;
};

DenoiserNet init_denoiser(std::uint64_t seed, const NetConfig& config);

// Closed-form parameter count for a config.
std::size_t denoiser_param_count(const NetConfig& config);

std::vector<double> timestep_embedding(double t, int dim);

// Activations kept by a forward pass for the matching backward pass.
struct NetCache {
  Tensor z;
  std::vector<double> temb;
  std::vector<double> cond;
  struct Block {
    Tensor h_in, act_in, pre_mod, pre_act, act;
    std::vector<double> gamma;
  };
  std::vector<Block> blocks;
  Tensor h_out, act_out;
};

Tensor forward_denoiser(const DenoiserNet& net, const Latent& z, double t, std::span<const double> c,
                        NetCache* cache = nullptr);

// Same network evaluated with an explicit weight set (adapter views use this).
Tensor forward_with(const NetConfig& config, const ParamSet& params, const Latent& z, double t,
                    std::span<const double> c, NetCache* cache = nullptr);

// Reverse pass. Accumulates into dparams (same layout as params) when given,
// and writes the input gradient into dz when given.
void backward_denoiser(const NetConfig& config, const ParamSet& params, const NetCache& cache,
                       const Tensor& dout, ParamSet* dparams, Tensor* dz);

// Names of the weight matrices a low-rank adapter may target (all conv and
// linear weights).
std::vector<std::string> adaptable_layers(const DenoiserNet& net);

// --- codec ---------------------------------------------------------------

enum class CodecKind { Identity, Learned };

// Identity: encode/decode are exact identities (decode still clamps).
// Learned: space-to-depth by `factor`, then a 1x1 projection to
// latent_channels; the decoder mirrors it.
struct Codec {
  CodecKind kind = CodecKind::Identity;
  int factor = 1;
  int latent_channels = 3;
  int image_channels = 3;
  ParamSet params;
};

Codec identity_codec(int channels = 3);
Codec init_learned_codec(std::uint64_t seed, int image_channels, int latent_channels, int factor = 2);

Latent encode(const Codec& codec, const ImageTensor& x);
ImageTensor decode(const Codec& codec, const Latent& z);
// decode without the final clamp; linear in z
Tensor decode_linear(const Codec& codec, const Latent& z);
// gradient of decode_linear w.r.t. z (the map is linear, so no cache)
Latent decode_linear_backward(const Codec& codec, const Tensor& dx, ParamSet* dparams, const Latent* z);
Tensor encode_backward(const Codec& codec, const ImageTensor& x, const Latent& dz, ParamSet* dparams);

// Trains a learned codec on image patches with Adam on reconstruction MSE.
// Returns the final mean training loss.
double train_codec(Codec& codec, std::span<const ImageTensor> patches, int steps, double lr, std::uint64_t seed);

// --- low-rank adapter ----------------------------------------------------

// For each target weight W viewed as an n x m matrix, a pair A [r x m],
// B [n x r]; the adapted weight is W + scale * B A.
struct LowRankAdapter {
  int rank = 4;
  double scale = 1.0;
  std::vector<std::string> targets;
  ParamSet factors;  // "<target>.lora_a", "<target>.lora_b"
};

// A ~ N(0, 1/m), B = 0, so a fresh adapter is a no-op.
LowRankAdapter make_adapter(const DenoiserNet& net, int rank, double scale, std::uint64_t seed,
                            std::vector<std::string> targets = {});

// Lazily adapted network: weights are recomputed from base + adapter on each
// use and never stored.
class AdaptedView {
 public:
  AdaptedView(const DenoiserNet& base, const LowRankAdapter& adapter);

  ParamSet effective_params() const;
  Tensor forward(const Latent& z, double t, std::span<const double> c, NetCache* cache = nullptr) const;
  const NetConfig& config() const { return base_->config; }

 private:
  const DenoiserNet* base_;
  const LowRankAdapter* adapter_;
};

AdaptedView apply_adapter(const DenoiserNet& net, const LowRankAdapter& adapter);
DenoiserNet merge_adapter(const DenoiserNet& net, const LowRankAdapter& adapter);

// Chain rule from effective-weight gradients to factor gradients.
void adapter_backward(const DenoiserNet& base, const LowRankAdapter& adapter, const ParamSet& d_effective,
                      ParamSet& d_factors);

}  // namespace tsr::nets
