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

#include "tsr/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace tsr::training {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename T>
std::vector<T> draw_batch(std::span<const T> pool, int batch_size, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<T> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) batch.push_back(pool[pick(rng)]);
  return batch;
}

void check_loss(double loss, long step, const char* what) {
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << what << " loss is " << loss << " at step " << step;
    fail(ErrorCode::NonFiniteLoss, os.str());
  }
}

// Reconstruction loss of one restored pair, scaled by k; accumulates the
// parameter gradient. Clamped pixels pass no gradient.
double restore_grad(const nets::DenoiserNet& net, const degradation::TrainingPair& pair, const TeacherSpec& spec,
                    const nets::Codec& codec, const losses::LossWeights& w, const losses::PercepExtractor& ex, double k,
                    ParamSet& grads) {
  nets::NetCache cache;
  const auto r = diffusion::student_restore(diffusion::handle(net), codec, pair.lr, spec.scale, spec.cond, &cache);
  Tensor g;
  const double loss = k * losses::rec_loss(r.x0, pair.gt, w, ex, &g);
  const Tensor y = nets::decode_linear(codec, r.z0s);
  for (std::size_t i = 0; i < y.size(); ++i) {
    g.data()[i] = (y.data()[i] < 0.0 || y.data()[i] > 1.0) ? 0.0 : g.data()[i] * k;
  }
  const Tensor dz = nets::decode_linear_backward(codec, g, nullptr, nullptr);
  nets::backward_denoiser(net.config, net.params, cache, dz, &grads, nullptr);
  return loss;
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::TeacherF: return "teacher_f";
    case Stage::TeacherR: return "teacher_r";
    case Stage::Stage1: return "stage1";
    case Stage::Stage2: return "stage2";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& s) {
  if (s == "teacher_f") return Stage::TeacherF;
  if (s == "teacher_r") return Stage::TeacherR;
  if (s == "stage1") return Stage::Stage1;
  if (s == "stage2") return Stage::Stage2;
  fail(ErrorCode::ValidationError, "unknown stage '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorCode::ValidationError, "lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(ErrorCode::ValidationError, "beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorCode::ValidationError, "beta2 must lie in [0,1)");
  if (!(eps > 0.0)) fail(ErrorCode::ValidationError, "eps must be > 0");
  if (!(weight_decay >= 0.0)) fail(ErrorCode::ValidationError, "weight_decay must be >= 0");
  if (steps < 0) fail(ErrorCode::ValidationError, "steps must be >= 0");
  if (batch_size < 1) fail(ErrorCode::ValidationError, "batch_size must be >= 1");
  if (adapter_rank < 1) fail(ErrorCode::ValidationError, "adapter_rank must be >= 1");
  if (checkpoint_every < 0) fail(ErrorCode::ValidationError, "checkpoint_every must be >= 0");
}

AdamState make_adam_state(const ParamSet& params) { return {params.zeros_like(), params.zeros_like(), 0}; }

void optimizer_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainConfig& cfg) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    fail(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  if (!grads.all_finite()) {
    fail(ErrorCode::NonFiniteGradient, "non-finite gradient at step " + std::to_string(state.step + 1));
  }
  ++state.step;
  kernels::AdamCoeffs c;
  c.lr = cfg.lr;
  c.beta1 = cfg.beta1;
  c.beta2 = cfg.beta2;
  c.eps = cfg.eps;
  c.weight_decay = cfg.weight_decay;
  c.bias_correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  c.bias_correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto& k = kernels::active();
  auto& p = params.items();
  for (std::size_t i = 0; i < p.size(); ++i) {
    k.adamw(p[i].value.size(), p[i].value.data(), grads.items()[i].value.data(), state.m.items()[i].value.data(),
            state.v.items()[i].value.data(), c);
  }
}

void RunLog::append(long step, double loss, double seconds) {
  if (!entries_.empty() && step <= entries_.back().step) {
    fail(ErrorCode::InvalidArgument, "run log steps must increase");
  }
  entries_.push_back({step, loss, seconds});
}

TeacherSpec fidelity_teacher_spec() {
  TeacherSpec s;
  s.restorer.lr = 3e-3;
  s.restorer.steps = 1500;
  s.restorer.batch_size = 4;
  s.restorer.stage = Stage::TeacherF;
  s.restorer.seed = 101;
  s.eps = s.restorer;
  s.eps.seed = 102;
  s.percep_weight = 0.0;
  return s;
}

TeacherSpec realness_teacher_spec() {
  TeacherSpec s = fidelity_teacher_spec();
  s.restorer.stage = Stage::TeacherR;
  s.eps.stage = Stage::TeacherR;
  s.restorer.seed = 201;
  s.eps.seed = 202;
  s.percep_weight = 2.0;
  return s;
}

TeacherRun pretrain_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                            const nets::Codec& codec, const losses::PercepExtractor& ex) {
  if (data.empty()) fail(ErrorCode::EmptyData, "teacher pretraining needs at least one training pair");
  spec.restorer.validate();
  spec.eps.validate();
  TeacherRun run;
  run.restorer_log = RunLog(spec.restorer.seed, {});
  run.eps_log = RunLog(spec.eps.seed, {});
  nets::DenoiserNet restorer = nets::init_denoiser(derive_seed(spec.restorer.seed, 1), spec.net);

  // restorer: rec loss with a pole-specific perceptual weight
  losses::LossWeights w;
  w.lambda_l2 = 1.0;
  w.lambda_lp = spec.percep_weight;
  {
    Rng rng(derive_seed(spec.restorer.seed, 3));
    AdamState st = make_adam_state(restorer.params);
    const double inv_b = 1.0 / spec.restorer.batch_size;
    for (long step = 1; step <= spec.restorer.steps; ++step) {
      const auto start = Clock::now();
      const auto batch = draw_batch(data, spec.restorer.batch_size, rng);
      ParamSet grads = restorer.params.zeros_like();
      double loss = 0.0;
      for (const auto& pair : batch) {
        loss += restore_grad(restorer, pair, spec, codec, w, ex, inv_b, grads);
      }
      check_loss(loss, step, "restorer");
      optimizer_step(restorer.params, grads, st, spec.restorer);
      run.restorer_log.append(step, loss, seconds_since(start));
    }
  }

  // joint phase: the same net keeps restoring at t = 1 and learns the
  // clean-ward displacement z0 - z_t at t < 1 on its own pole's outputs
  nets::DenoiserNet& eps_net = run.teacher.net;
  eps_net = restorer;
  std::vector<Latent> pool;
  pool.reserve(data.size());
  for (const auto& pair : data) {
    pool.push_back(diffusion::student_restore(diffusion::handle(restorer), codec, pair.lr, spec.scale, spec.cond).z0s);
  }
  {
    Rng rng(derive_seed(spec.eps.seed, 3));
    AdamState st = make_adam_state(eps_net.params);
    const double inv_b = 1.0 / spec.eps.batch_size;
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (long step = 1; step <= spec.eps.steps; ++step) {
      const auto start = Clock::now();
      ParamSet grads = eps_net.params.zeros_like();
      double loss = 0.0;
      for (int b = 0; b < spec.eps.batch_size; ++b) {
        const std::size_t k = pick(rng);
        const Latent& z0 = pool[k];
        const diffusion::Timestep t = diffusion::sample_timestep(rng);
        Latent eps(z0.shape());
        fill_normal(rng, eps.values(), spec.noise_std);
        const Latent z_t = diffusion::add_noise(z0, t, eps);
        nets::NetCache cache;
        const Tensor pred = nets::forward_denoiser(eps_net, z_t, t, spec.cond, &cache);
        Tensor g = pred;
        axpy(t.value(), eps, g);  // pred - (-t * eps)
        loss += inv_b * l2_norm(g) * l2_norm(g) / static_cast<double>(g.size());
        for (double& v : g.values()) v *= 2.0 * inv_b / static_cast<double>(g.size());
        nets::backward_denoiser(eps_net.config, eps_net.params, cache, g, &grads, nullptr);
        loss += restore_grad(eps_net, data[k], spec, codec, w, ex, inv_b, grads);
      }
      check_loss(loss, step, "eps-net");
      optimizer_step(eps_net.params, grads, st, spec.eps);
      run.eps_log.append(step, loss, seconds_since(start));
    }
  }
  return run;
}

TeacherRun pretrain_fidelity_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                                     const nets::Codec& codec, const losses::PercepExtractor& ex) {
  return pretrain_teacher(data, spec, codec, ex);
}

TeacherRun pretrain_realness_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                                     const nets::Codec& codec, const losses::PercepExtractor& ex) {
  return pretrain_teacher(data, spec, codec, ex);
}

StudentRun run_stage1(std::span<const degradation::TrainingPair> data, const Teacher& teacher_f,
                      const Teacher& teacher_r, const Stage1Spec& spec, const nets::Codec& codec,
                      const losses::PercepExtractor& ex, const CheckpointHook& hook) {
  if (data.empty()) fail(ErrorCode::EmptyData, "stage 1 needs at least one training pair");
  spec.train.validate();
  spec.weights.validate();
  StudentRun run;
  run.log = RunLog(spec.train.seed, {});
  // the student starts from the realness teacher
  nets::DenoiserNet base = teacher_r.net;
  if (spec.train.use_adapter) {
    run.adapter = nets::make_adapter(base, spec.train.adapter_rank, spec.train.adapter_scale,
                                     derive_seed(spec.train.seed, 7));
  }
  ParamSet& trainable = run.adapter ? run.adapter->factors : base.params;
  AdamState st = make_adam_state(trainable);
  Rng batch_rng(derive_seed(spec.train.seed, 1));
  Rng loss_rng(derive_seed(spec.train.seed, 2));

  for (long step = 1; step <= spec.train.steps; ++step) {
    const auto start = Clock::now();
    const auto batch = draw_batch(data, spec.train.batch_size, batch_rng);
    ParamSet eff = run.adapter ? nets::AdaptedView(base, *run.adapter).effective_params() : base.params;
    losses::Stage1Nets n{{&base.config, &eff},
                         diffusion::handle(teacher_f.net),
                         diffusion::handle(teacher_r.net),
                         &codec,
                         spec.scale,
                         spec.noise_std,
                         spec.cond};
    ParamSet d_eff = eff.zeros_like();
    const auto terms = losses::stage1_loss(batch, n, spec.weights, ex, loss_rng, &d_eff);
    check_loss(terms.total, step, "stage-1");
    if (run.adapter) {
      ParamSet d_fac = run.adapter->factors.zeros_like();
      nets::adapter_backward(base, *run.adapter, d_eff, d_fac);
      optimizer_step(trainable, d_fac, st, spec.train);
    } else {
      optimizer_step(trainable, d_eff, st, spec.train);
    }
    run.log.append(step, terms.total, seconds_since(start));
    if (hook && spec.train.checkpoint_every > 0 && step % spec.train.checkpoint_every == 0) {
      hook(step, run.adapter ? nets::merge_adapter(base, *run.adapter) : base);
    }
  }
  run.student = run.adapter ? nets::merge_adapter(base, *run.adapter) : std::move(base);
  return run;
}

std::vector<Latent> stage1_latents(const nets::DenoiserNet& stage1, std::span<const degradation::TrainingPair> data,
                                   const nets::Codec& codec, int scale, std::span<const double> cond) {
  std::vector<Latent> out;
  out.reserve(data.size());
  for (const auto& pair : data) {
    out.push_back(diffusion::student_restore(diffusion::handle(stage1), codec, pair.lr, scale, cond).z0s);
  }
  return out;
}

StudentRun run_stage2(const nets::DenoiserNet& stage1, std::span<const Latent> pool, const Stage2Spec& spec,
                      const losses::EpsField* teacher_override, const CheckpointHook& hook) {
  if (pool.empty()) fail(ErrorCode::EmptyData, "stage 2 needs at least one stage-1 latent");
  spec.train.validate();
  StudentRun run;
  run.log = RunLog(spec.train.seed, {});
  // frozen copy of the stage-1 student is the teacher; the student starts from it too
  const nets::DenoiserNet teacher_s = stage1;
  const losses::EpsField teacher =
      teacher_override != nullptr ? *teacher_override : losses::field_of(diffusion::handle(teacher_s));
  nets::DenoiserNet base = stage1;
  if (spec.train.use_adapter) {
    run.adapter = nets::make_adapter(base, spec.train.adapter_rank, spec.train.adapter_scale,
                                     derive_seed(spec.train.seed, 7));
  }
  ParamSet& trainable = run.adapter ? run.adapter->factors : base.params;
  AdamState st = make_adam_state(trainable);
  Rng batch_rng(derive_seed(spec.train.seed, 1));
  Rng loss_rng(derive_seed(spec.train.seed, 2));

  for (long step = 1; step <= spec.train.steps; ++step) {
    const auto start = Clock::now();
    const auto batch = draw_batch(pool, spec.train.batch_size, batch_rng);
    ParamSet eff = run.adapter ? nets::AdaptedView(base, *run.adapter).effective_params() : base.params;
    ParamSet d_eff = eff.zeros_like();
    const double loss =
        losses::stage2_loss(batch, teacher, {&base.config, &eff}, loss_rng, spec.cond, spec.form, &d_eff);
    check_loss(loss, step, "stage-2");
    if (run.adapter) {
      ParamSet d_fac = run.adapter->factors.zeros_like();
      nets::adapter_backward(base, *run.adapter, d_eff, d_fac);
      optimizer_step(trainable, d_fac, st, spec.train);
    } else {
      optimizer_step(trainable, d_eff, st, spec.train);
    }
    run.log.append(step, loss, seconds_since(start));
    if (hook && spec.train.checkpoint_every > 0 && step % spec.train.checkpoint_every == 0) {
      hook(step, run.adapter ? nets::merge_adapter(base, *run.adapter) : base);
    }
  }
  run.student = run.adapter ? nets::merge_adapter(base, *run.adapter) : std::move(base);
  return run;
}

}  // namespace tsr::training
