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
#include <string>

#include "tsr/losses.hpp"

namespace tsr::losses {

namespace {

constexpr double kNormEps = 1e-10;
constexpr double kBiasStd = 0.1;
constexpr double kEnergyDelta = 1e-4;

std::string lvl(int l, const char* leaf) { return "l" + std::to_string(l) + "." + leaf; }

// Per-pixel unit normalization across channels; returns the norms.
Tensor normalize_pixels(Tensor& a) {
  const std::size_t plane = a.shape().plane();
  Tensor norm(Shape{1, a.height(), a.width()});
  for (std::size_t j = 0; j < plane; ++j) {
    double s = kNormEps;
    for (int c = 0; c < a.channels(); ++c) s += a.plane(c)[j] * a.plane(c)[j];
    const double n = std::sqrt(s);
    norm.data()[j] = n;
    for (int c = 0; c < a.channels(); ++c) a.plane(c)[j] /= n;
  }
  return norm;
}

Tensor normalize_backward(const Tensor& f, const Tensor& norm, const Tensor& df) {
  Tensor da(f.shape());
  const std::size_t plane = f.shape().plane();
  for (std::size_t j = 0; j < plane; ++j) {
    double proj = 0.0;
    for (int c = 0; c < f.channels(); ++c) proj += f.plane(c)[j] * df.plane(c)[j];
    const double n = norm.data()[j];
    for (int c = 0; c < f.channels(); ++c) da.plane(c)[j] = (df.plane(c)[j] - f.plane(c)[j] * proj) / n;
  }
  return da;
}

}  // namespace

void LossWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::ValidationError, std::string(name) + " must be >= 0");
  };
  check(lambda_l2, "lambda_l2");
  check(lambda_lp, "lambda_lp");
  check(lambda_fl, "lambda_fl");
  check(lambda_rn, "lambda_rn");
  check(gamma_time, "gamma_time");
}

PercepExtractor::PercepExtractor(std::uint64_t seed, int channels) : channels_(channels), widths_{8, 16, 16} {
  Rng rng(seed);
  int in = channels;
  for (int l = 0; l < levels(); ++l) {
    const int out = widths_[l];
    auto& w = params_.add(lvl(l, "w"), {out, in, 3, 3}).value;
    layers::init_normal(rng, w, std::sqrt(2.0 / (in * 9)));
    // zero-mean taps: the pyramid responds to structure, not flat intensity
    for (std::size_t k = 0; k < w.size(); k += 9) {
      double m = 0.0;
      for (int j = 0; j < 9; ++j) m += w[k + j] / 9.0;
      for (int j = 0; j < 9; ++j) w[k + j] -= m;
    }
    layers::init_normal(rng, params_.add(lvl(l, "b"), {out}).value, kBiasStd);
    in = out;
  }
}

std::vector<Tensor> PercepExtractor::features(const ImageTensor& x, Cache* cache) const {
  if (x.channels() != channels_) fail(ErrorCode::ShapeMismatch, "perceptual extractor expects " +
                                                                    std::to_string(channels_) + " channels");
  if (x.height() < min_size() || x.width() < min_size()) {
    fail(ErrorCode::TooSmall, "perceptual distance needs images of at least " + std::to_string(min_size()) + " pixels");
  }
  std::vector<Tensor> feats;
  Tensor in = x;
  for (double& v : in.values()) v = 2.0 * v - 1.0;
  for (int l = 0; l < levels(); ++l) {
    if (l > 0) in = layers::avg_pool2(in);
    Tensor pre = layers::conv2d(in, params_.get(lvl(l, "w")).value, params_.get(lvl(l, "b")).value, widths_[l], 3);
    Tensor act(pre.shape());
    for (std::size_t i = 0; i < pre.size(); ++i) act.data()[i] = std::sqrt(pre.data()[i] * pre.data()[i] + kEnergyDelta);
    Tensor pool = layers::avg_pool2(act);
    Tensor feat = layers::avg_pool2(pool);
    Tensor norm = normalize_pixels(feat);
    if (cache != nullptr) {
      cache->in.push_back(in);
      cache->pre.push_back(std::move(pre));
      cache->act.push_back(act);
      cache->pool.push_back(std::move(pool));
      cache->feat.push_back(feat);
      cache->norm.push_back(std::move(norm));
    }
    feats.push_back(std::move(feat));
    in = std::move(act);
  }
  return feats;
}

Tensor PercepExtractor::features_backward(const Cache& cache, const std::vector<Tensor>& dfeat) const {
  Tensor carry;  // gradient arriving at this level's energy from the level above
  Tensor d_in;
  for (int l = levels() - 1; l >= 0; --l) {
    const Tensor d_feat = normalize_backward(cache.feat[l], cache.norm[l], dfeat[l]);
    const Tensor d_pool = layers::avg_pool2_backward(d_feat, cache.pool[l].shape());
    Tensor d_act = layers::avg_pool2_backward(d_pool, cache.act[l].shape());
    if (!carry.empty()) axpy(1.0, carry, d_act);
    Tensor d_pre(d_act.shape());
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      d_pre.data()[i] = d_act.data()[i] * cache.pre[l].data()[i] / cache.act[l].data()[i];
    }
    d_in = Tensor();
    layers::conv2d_backward(cache.in[l], d_pre, params_.get(lvl(l, "w")).value, widths_[l], 3, {}, {}, &d_in);
    if (l > 0) carry = layers::avg_pool2_backward(d_in, cache.act[l - 1].shape());
  }
  for (double& v : d_in.values()) v *= 2.0;
  return d_in;
}

std::vector<double> PercepExtractor::embedding(const ImageTensor& x) const {
  Cache cache;
  features(x, &cache);
  std::vector<double> e;
  for (int l = 0; l < levels(); ++l) {
    const Tensor& act = cache.act[l];
    const double inv = 1.0 / static_cast<double>(act.shape().plane());
    for (int c = 0; c < act.channels(); ++c) {
      double s = 0.0;
      const double* p = act.plane(c);
      for (std::size_t j = 0; j < act.shape().plane(); ++j) s += p[j];
      e.push_back(s * inv);
    }
  }
  return e;
}

double percep_dist(const PercepExtractor& ex, const ImageTensor& a, const ImageTensor& b, Tensor* grad_a) {
  require_same_shape(a, b, "percep_dist");
  PercepExtractor::Cache cache;
  const auto fa = ex.features(a, grad_a != nullptr ? &cache : nullptr);
  const auto fb = ex.features(b);
  const double inv_l = 1.0 / ex.levels();
  double d = 0.0;
  std::vector<Tensor> dfeat;
  for (int l = 0; l < ex.levels(); ++l) {
    d += inv_l * mean_sq_diff(fa[l], fb[l]);
    if (grad_a != nullptr) {
      Tensor g = sub(fa[l], fb[l]);
      for (double& v : g.values()) v *= 2.0 * inv_l / static_cast<double>(g.size());
      dfeat.push_back(std::move(g));
    }
  }
  if (grad_a != nullptr) *grad_a = ex.features_backward(cache, dfeat);
  return d;
}

double rec_loss(const ImageTensor& x0, const ImageTensor& gt, const LossWeights& w, const PercepExtractor& ex,
                Tensor* grad_x0) {
  require_same_shape(x0, gt, "rec_loss");
  double loss = 0.0;
  if (grad_x0 != nullptr) *grad_x0 = Tensor(x0.shape());
  if (w.lambda_l2 != 0.0) {
    loss += w.lambda_l2 * mean_sq_diff(x0, gt);
    if (grad_x0 != nullptr) {
      const double k = 2.0 * w.lambda_l2 / static_cast<double>(x0.size());
      Tensor diff = sub(x0, gt);
      axpy(k, diff, *grad_x0);
    }
  }
  if (w.lambda_lp != 0.0) {
    Tensor gp;
    loss += w.lambda_lp * percep_dist(ex, x0, gt, grad_x0 != nullptr ? &gp : nullptr);
    if (grad_x0 != nullptr) axpy(w.lambda_lp, gp, *grad_x0);
  }
  return loss;
}

double distill_loss(NetHandle teacher, NetHandle student, const Latent& z_t, const Latent& z_ts, double t,
                    std::span<const double> c, double gamma_time, StudentGrads grads) {
  require_same_shape(z_t, z_ts, "distill_loss");
  const bool want = grads.d_params != nullptr || grads.d_z_ts != nullptr;
  nets::NetCache cache_t, cache_s;
  const Tensor e_ts = teacher(z_ts, t, c, want ? &cache_t : nullptr);
  const Tensor e_s = student(z_ts, t, c, want ? &cache_s : nullptr);
  const Tensor e_t = teacher(z_t, t, c);
  const double loss = mean_sq_diff(e_ts, e_s) + gamma_time * mean_sq_diff(e_ts, e_t);
  if (!want) return loss;

  const double k = 2.0 * grads.weight / static_cast<double>(e_s.size());
  Tensor g_s(e_s.shape()), g_ts(e_s.shape());
  for (std::size_t i = 0; i < e_s.size(); ++i) {
    const double d1 = e_ts.data()[i] - e_s.data()[i];
    g_s.data()[i] = -k * d1;
    g_ts.data()[i] = k * (d1 + gamma_time * (e_ts.data()[i] - e_t.data()[i]));
  }
  Tensor dz_s, dz_t;
  nets::backward_denoiser(*student.config, *student.params, cache_s, g_s, grads.d_params, &dz_s);
  if (grads.d_z_ts != nullptr) {
    nets::backward_denoiser(*teacher.config, *teacher.params, cache_t, g_ts, nullptr, &dz_t);
    if (grads.d_z_ts->empty()) *grads.d_z_ts = Tensor(z_ts.shape());
    axpy(1.0, dz_s, *grads.d_z_ts);
    axpy(1.0, dz_t, *grads.d_z_ts);
  }
  return loss;
}

Stage1Terms stage1_loss(std::span<const degradation::TrainingPair> batch, const Stage1Nets& n, const LossWeights& w,
                        const PercepExtractor& ex, Rng& rng, ParamSet* d_student) {
  if (batch.empty()) fail(ErrorCode::EmptyData, "stage-1 loss needs a non-empty batch");
  Stage1Terms terms;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const bool rec_on = w.lambda_l2 != 0.0 || w.lambda_lp != 0.0;
  for (const auto& pair : batch) {
    // Algorithm order: encode, add noise, restore, losses.
    const Latent z0 = nets::encode(*n.codec, pair.gt);
    const diffusion::Timestep t = diffusion::sample_timestep(rng);
    Latent eps(z0.shape());
    fill_normal(rng, eps.values(), n.noise_std);
    const Latent z_t = diffusion::add_noise(z0, t, eps);

    nets::NetCache cache;
    const auto r = diffusion::student_restore(n.student, *n.codec, pair.lr, n.scale, n.cond,
                                              d_student != nullptr ? &cache : nullptr);
    const Latent z_ts = diffusion::add_noise(r.z0s, t, eps);

    Tensor d_z0s;
    if (rec_on) {
      Tensor g_x0;
      const double rec = rec_loss(r.x0, pair.gt, w, ex, d_student != nullptr ? &g_x0 : nullptr);
      terms.rec += inv_b * rec;
      if (d_student != nullptr) {
        // clamp in decode passes gradient only inside [0,1]
        const Tensor y = nets::decode_linear(*n.codec, r.z0s);
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (y.data()[i] < 0.0 || y.data()[i] > 1.0) g_x0.data()[i] = 0.0;
        }
        for (double& v : g_x0.values()) v *= inv_b;
        d_z0s = nets::decode_linear_backward(*n.codec, g_x0, nullptr, nullptr);
      }
    }
    if (d_student != nullptr && d_z0s.empty()) d_z0s = Tensor(r.z0s.shape());

    Tensor d_z_ts(r.z0s.shape());
    if (w.lambda_fl != 0.0) {
      const double l = distill_loss(n.teacher_f, n.student, z_t, z_ts, t, n.cond, w.gamma_time,
                                    {d_student, d_student != nullptr ? &d_z_ts : nullptr, w.lambda_fl * inv_b});
      terms.fl += inv_b * l;
    }
    if (w.lambda_rn != 0.0) {
      const double l = distill_loss(n.teacher_r, n.student, z_t, z_ts, t, n.cond, w.gamma_time,
                                    {d_student, d_student != nullptr ? &d_z_ts : nullptr, w.lambda_rn * inv_b});
      terms.rn += inv_b * l;
    }
    if (d_student != nullptr) {
      axpy(1.0, d_z_ts, d_z0s);
      nets::backward_denoiser(*n.student.config, *n.student.params, cache, d_z0s, d_student, nullptr);
    }
  }
  terms.total = terms.rec + w.lambda_rn * terms.rn + w.lambda_fl * terms.fl;
  return terms;
}

EpsField field_of(NetHandle net) {
  return [net](const Latent& z, double t, std::span<const double> c) { return net(z, t, c); };
}

EpsField constant_field(Tensor v) {
  return [v = std::move(v)](const Latent& z, double, std::span<const double>) {
    require_same_shape(z, v, "constant_field");
    return v;
  };
}

double control_loss(const EpsField& teacher, NetHandle student, const Latent& z0, double t, double t_next,
                    std::span<const double> c, ControlForm form, ParamSet* d_student, double weight) {
  if (!(t_next > t)) {
    fail(ErrorCode::ReversedInterval,
         "control loss needs t < t', got t=" + std::to_string(t) + " t'=" + std::to_string(t_next));
  }
  const diffusion::Timestep tt(t), tn(t_next);
  const Tensor a0 = teacher(z0, t, c);
  const Latent z_t = diffusion::add_noise(z0, tt, a0);
  Tensor a, b;
  if (form == ControlForm::AtZ0) {
    a = a0;
    b = teacher(z0, t_next, c);
  } else {
    const Latent z_tn = diffusion::step_noise(z_t, tt, tn, a0);
    a = teacher(z_t, t, c);
    b = teacher(z_tn, t_next, c);
  }
  nets::NetCache cache;
  const Tensor s = student(z_t, t, c, d_student != nullptr ? &cache : nullptr);
  require_same_shape(a, s, "control_loss");
  // t*a - t'*b + (t'-t)*s regrouped so equal fields cancel exactly
  Tensor r(s.shape());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.data()[i] = t * (a.data()[i] - s.data()[i]) - t_next * (b.data()[i] - s.data()[i]);
  }
  double loss = 0.0;
  for (double v : r.values()) loss += v * v;
  loss /= static_cast<double>(r.size());
  if (d_student != nullptr) {
    const double k = 2.0 * weight * (t_next - t) / static_cast<double>(r.size());
    for (double& v : r.values()) v *= k;
    nets::backward_denoiser(*student.config, *student.params, cache, r, d_student, nullptr);
  }
  return loss;
}

double stage2_loss(std::span<const Latent> batch_z0, const EpsField& teacher, NetHandle student, Rng& rng,
                   std::span<const double> c, ControlForm form, ParamSet* d_student) {
  if (batch_z0.empty()) fail(ErrorCode::EmptyData, "stage-2 loss needs a non-empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch_z0.size());
  double loss = 0.0;
  for (const auto& z0 : batch_z0) {
    const auto [t, tn] = diffusion::sample_timestep_pair(rng);
    loss += inv_b * control_loss(teacher, student, z0, t, tn, c, form, d_student, inv_b);
  }
  return loss;
}

}  // namespace tsr::losses
