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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsr/degradation.hpp"
#include "tsr/diffusion.hpp"
#include "tsr/kernels.hpp"
#include "tsr/losses.hpp"
#include "tsr/nets.hpp"

namespace tsr::training {

enum class Stage { TeacherF, TeacherR, Stage1, Stage2 };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct TrainConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int steps = 1;
  int batch_size = 1;
  std::uint64_t seed = 0;
  Stage stage = Stage::Stage1;
  bool use_adapter = false;
  int adapter_rank = 4;
  double adapter_scale = 1.0;
  int checkpoint_every = 0;  // 0 disables intermediate checkpoints

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  long step = 0;
};

AdamState make_adam_state(const ParamSet& params);

// One AdamW update. A non-finite gradient throws NonFiniteGradient and leaves
// params and state untouched.
void optimizer_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainConfig& cfg);

class RunLog {
 public:
  struct Entry {
    long step;
    double loss;
    double seconds;
  };

  RunLog() = default;
  RunLog(std::uint64_t seed, std::string config_hash) : seed_(seed), config_hash_(std::move(config_hash)) {}

  void append(long step, double loss, double seconds);
  const std::vector<Entry>& entries() const { return entries_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& config_hash() const { return config_hash_; }

 private:
  std::uint64_t seed_ = 0;
  std::string config_hash_;
  std::vector<Entry> entries_;
};

using CheckpointHook = std::function<void(long step, const nets::DenoiserNet& net)>;

// One net per pole: it restores at t = 1 and predicts the clean-ward
// displacement of noised latents at t < 1.
struct Teacher {
  nets::DenoiserNet net;
};

struct TeacherSpec {
  nets::NetConfig net;
  TrainConfig restorer;  // restoration-only warm-up
  TrainConfig eps;       // joint phase that adds the displacement task
  double percep_weight = 0.0;  // 0 for the fidelity pole
  double noise_std = 0.1;
  int scale = 4;
  std::vector<double> cond;
};

// Default schedules for the two poles at desk scale.
TeacherSpec fidelity_teacher_spec();
TeacherSpec realness_teacher_spec();

struct TeacherRun {
  Teacher teacher;
  RunLog restorer_log;  // restoration-only warm-up
  RunLog eps_log;       // joint restoration + displacement phase
};

TeacherRun pretrain_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                            const nets::Codec& codec, const losses::PercepExtractor& ex);
TeacherRun pretrain_fidelity_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                                     const nets::Codec& codec, const losses::PercepExtractor& ex);
TeacherRun pretrain_realness_teacher(std::span<const degradation::TrainingPair> data, const TeacherSpec& spec,
                                     const nets::Codec& codec, const losses::PercepExtractor& ex);

struct Stage1Spec {
  TrainConfig train;
  losses::LossWeights weights;
  double noise_std = 0.1;
  int scale = 4;
  std::vector<double> cond;
};

struct StudentRun {
  nets::DenoiserNet student;  // adapter already merged when one was used
  std::optional<nets::LowRankAdapter> adapter;
  RunLog log;
};

StudentRun run_stage1(std::span<const degradation::TrainingPair> data, const Teacher& teacher_f,
                      const Teacher& teacher_r, const Stage1Spec& spec, const nets::Codec& codec,
                      const losses::PercepExtractor& ex, const CheckpointHook& hook = {});

struct Stage2Spec {
  TrainConfig train;
  losses::ControlForm form = losses::ControlForm::AtZ0;
  int scale = 4;
  std::vector<double> cond;
};

// Stage-1 output latents for every LR input, the Stage-2 training pool.
std::vector<Latent> stage1_latents(const nets::DenoiserNet& stage1, std::span<const degradation::TrainingPair> data,
                                   const nets::Codec& codec, int scale, std::span<const double> cond);

// The teacher defaults to the frozen Stage-1 student; a field can be supplied
// instead (e.g. a constant field for the solvable case).
StudentRun run_stage2(const nets::DenoiserNet& stage1, std::span<const Latent> pool, const Stage2Spec& spec,
                      const losses::EpsField* teacher_override = nullptr, const CheckpointHook& hook = {});

}  // namespace tsr::training
