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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsr/kernels.hpp"
#include "tsr/nets.hpp"

namespace tsr::nets {

namespace {

int packed_channels(const Codec& c) { return c.image_channels * c.factor * c.factor; }

void require_divisible(const Codec& codec, const Tensor& x) {
  if (x.height() % codec.factor != 0 || x.width() % codec.factor != 0) {
    fail(ErrorCode::ShapeNotDivisible,
         "image " + to_string(x.shape()) + " not divisible by codec factor " + std::to_string(codec.factor));
  }
}

}  // namespace

Codec identity_codec(int channels) {
  Codec c;
  c.kind = CodecKind::Identity;
  c.factor = 1;
  c.latent_channels = channels;
  c.image_channels = channels;
  return c;
}

Codec init_learned_codec(std::uint64_t seed, int image_channels, int latent_channels, int factor) {
  if (image_channels < 1 || latent_channels < 1 || factor < 1) {
    fail(ErrorCode::InvalidArgument, "codec channels and factor must be positive");
  }
  Codec c;
  c.kind = CodecKind::Learned;
  c.factor = factor;
  c.image_channels = image_channels;
  c.latent_channels = latent_channels;
  const int p = packed_channels(c);
  Rng rng(seed);
  layers::init_normal(rng, c.params.add("enc.w", {latent_channels, p, 1, 1}).value, 1.0 / std::sqrt(p));
  c.params.add("enc.b", {latent_channels});
  layers::init_normal(rng, c.params.add("dec.w", {p, latent_channels, 1, 1}).value, 1.0 / std::sqrt(latent_channels));
  c.params.add("dec.b", {p});
  return c;
}

Latent encode(const Codec& codec, const ImageTensor& x) {
  if (codec.kind == CodecKind::Identity) return x;
  if (x.channels() != codec.image_channels) {
    fail(ErrorCode::ShapeMismatch, "codec expects " + std::to_string(codec.image_channels) + " image channels");
  }
  require_divisible(codec, x);
  const Tensor packed = layers::space_to_depth(x, codec.factor);
  return layers::conv2d(packed, codec.params.get("enc.w").value, codec.params.get("enc.b").value,
                        codec.latent_channels, 1);
}

Tensor decode_linear(const Codec& codec, const Latent& z) {
  if (codec.kind == CodecKind::Identity) return z;
  if (z.channels() != codec.latent_channels) {
    fail(ErrorCode::ShapeMismatch, "codec expects " + std::to_string(codec.latent_channels) + " latent channels");
  }
  const Tensor packed = layers::conv2d(z, codec.params.get("dec.w").value, codec.params.get("dec.b").value,
                                       packed_channels(codec), 1);
  return layers::depth_to_space(packed, codec.factor);
}

ImageTensor decode(const Codec& codec, const Latent& z) { return clamp01(decode_linear(codec, z)); }

Latent decode_linear_backward(const Codec& codec, const Tensor& dx, ParamSet* dparams, const Latent* z) {
  if (codec.kind == CodecKind::Identity) return dx;
  const Tensor dpacked = layers::space_to_depth(dx, codec.factor);
  Tensor dz;
  const Latent zero_z(Shape{codec.latent_channels, dpacked.height(), dpacked.width()});
  const Latent& zin = z != nullptr ? *z : zero_z;
  std::span<double> dw, db;
  if (dparams != nullptr && z != nullptr) {
    dw = dparams->get("dec.w").value;
    db = dparams->get("dec.b").value;
  }
  layers::conv2d_backward(zin, dpacked, codec.params.get("dec.w").value, packed_channels(codec), 1, dw, db, &dz);
  return dz;
}

Tensor encode_backward(const Codec& codec, const ImageTensor& x, const Latent& dz, ParamSet* dparams) {
  if (codec.kind == CodecKind::Identity) return dz;
  const Tensor packed = layers::space_to_depth(x, codec.factor);
  std::span<double> dw, db;
  if (dparams != nullptr) {
    dw = dparams->get("enc.w").value;
    db = dparams->get("enc.b").value;
  }
  Tensor dpacked;
  layers::conv2d_backward(packed, dz, codec.params.get("enc.w").value, codec.latent_channels, 1, dw, db, &dpacked);
  return layers::depth_to_space(dpacked, codec.factor);
}

namespace {

// Principal-subspace start: the optimum of a linear autoencoder on the packed
// pixel vectors. Adam then only has to polish it.
void pca_init(Codec& codec, std::span<const ImageTensor> patches) {
  const int p = packed_channels(codec);
  const int l = codec.latent_channels;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  double n = 0.0;
  for (const auto& x : patches) {
    const Tensor packed = layers::space_to_depth(x, codec.factor);
    const std::size_t plane = packed.shape().plane();
    Eigen::VectorXd v(p);
    for (std::size_t j = 0; j < plane; ++j) {
      for (int c = 0; c < p; ++c) v[c] = packed.plane(c)[j];
      mu += v;
      cov.noalias() += v * v.transpose();
      n += 1.0;
    }
  }
  if (n < 2.0) return;
  mu /= n;
  cov = cov / n - mu * mu.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // eigenvalues ascend; take the top l
  const int k = std::min(l, p);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(l, p);
  for (int i = 0; i < k; ++i) basis.row(i) = es.eigenvectors().col(p - 1 - i).transpose();
  double* ew = codec.params.data("enc.w");
  double* eb = codec.params.data("enc.b");
  double* dw = codec.params.data("dec.w");
  double* db = codec.params.data("dec.b");
  const Eigen::VectorXd shift = -basis * mu;
  for (int i = 0; i < l; ++i) {
    eb[i] = shift[i];
    for (int c = 0; c < p; ++c) ew[i * p + c] = basis(i, c);
  }
  for (int c = 0; c < p; ++c) {
    db[c] = mu[c];
    for (int i = 0; i < l; ++i) dw[c * l + i] = basis(i, c);
  }
}

}  // namespace

double train_codec(Codec& codec, std::span<const ImageTensor> patches, int steps, double lr, std::uint64_t seed) {
  if (codec.kind == CodecKind::Identity) return 0.0;
  if (patches.empty()) fail(ErrorCode::EmptyData, "codec training needs at least one patch");
  for (const auto& x : patches) require_divisible(codec, x);
  pca_init(codec, patches);

  ParamSet m = codec.params.zeros_like();
  ParamSet v = codec.params.zeros_like();
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, patches.size() - 1);
  const auto& k = kernels::active();
  kernels::AdamCoeffs coeffs;
  coeffs.lr = lr;
  double last = 0.0;
  for (int step = 1; step <= steps; ++step) {
    const ImageTensor& x = patches[pick(rng)];
    const Latent z = encode(codec, x);
    const Tensor y = decode_linear(codec, z);
    last = mean_sq_diff(y, x);
    Tensor dy = sub(y, x);
    for (double& g : dy.values()) g *= 2.0 / static_cast<double>(dy.size());
    ParamSet grads = codec.params.zeros_like();
    const Latent dz = decode_linear_backward(codec, dy, &grads, &z);
    encode_backward(codec, x, dz, &grads);
    if (!grads.all_finite()) fail(ErrorCode::NonFiniteGradient, "codec gradient is not finite");
    coeffs.bias_correction1 = 1.0 - std::pow(coeffs.beta1, step);
    coeffs.bias_correction2 = 1.0 - std::pow(coeffs.beta2, step);
    auto& pi = codec.params.items();
    for (std::size_t i = 0; i < pi.size(); ++i) {
      k.adamw(pi[i].value.size(), pi[i].value.data(), grads.items()[i].value.data(), m.items()[i].value.data(),
              v.items()[i].value.data(), coeffs);
    }
  }
  if (steps == 0) {
    double s = 0.0;
    for (const auto& x : patches) s += mean_sq_diff(decode_linear(codec, encode(codec, x)), x);
    last = s / static_cast<double>(patches.size());
  }
  return last;
}

}  // namespace tsr::nets
