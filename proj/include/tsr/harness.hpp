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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tsr/degradation.hpp"
#include "tsr/eval.hpp"
#include "tsr/imaging.hpp"
#include "tsr/losses.hpp"
#include "tsr/nets.hpp"
#include "tsr/training.hpp"

namespace tsr::harness {

// --- configuration -------------------------------------------------------

struct CodecSection {
  nets::CodecKind kind = nets::CodecKind::Identity;
  int latent_channels = 10;
  int factor = 2;
  int steps = 300;
  double lr = 1e-3;
  std::uint64_t seed = 7;
};

struct TeacherSection {
  training::TrainConfig restorer;
  training::TrainConfig eps;
  double percep_weight = 0.0;
};

struct DataSection {
  std::string train_corpus = "data/train";
  std::string test_corpus = "data/test";
  int train_images = 24;
  int test_images = 8;
  int image_size = 96;
  std::uint64_t train_image_seed = 1;
  std::uint64_t test_image_seed = 2;
  int train_pairs = 256;
  int test_pairs = 48;
  std::uint64_t test_seed = 9;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  degradation::DegradationSpec degradation;
  imaging::PatchSpec patch;
  nets::NetConfig net;
  CodecSection codec;
  losses::LossWeights weights;
  double noise_std = 0.1;
  TeacherSection teacher_f;
  TeacherSection teacher_r;
  training::TrainConfig stage1;
  training::TrainConfig stage2;
  losses::ControlForm control_form = losses::ControlForm::AtZ0;
  int inference_steps = 1;
  std::vector<double> t_grid;
  std::vector<double> alpha_grid;
  DataSection data;
  std::string output_dir = "out";

  // Hex SHA-256 of the canonical serialization, filled by parse/default.
  std::string hash;

  void validate() const;
};

// All defaults, hash filled.
ExperimentConfig default_config();

// Parses the JSON key tree. Missing keys take defaults, unknown keys are
// rejected, and an empty or whitespace-only document is the default config.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Canonical form: every key present, objects key-sorted.
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

training::TeacherSpec teacher_spec(const ExperimentConfig& cfg, training::Stage pole);
training::Stage1Spec stage1_spec(const ExperimentConfig& cfg);
training::Stage2Spec stage2_spec(const ExperimentConfig& cfg);

// --- checkpoints ---------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string config_hash;
  std::string stage;
  long step = 0;
  std::uint64_t seed = 0;
  std::string created = "1970-01-01T00:00:00Z";
  nlohmann::json extra = nlohmann::json::object();  // model description

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  CheckpointMeta meta;
  ParamSet arrays;
};

// Layout (little-endian):
//   magic[8] | u32 version | u32 meta_len | meta JSON (UTF-8)
//   u32 n_arrays | per array: u16 name_len, name, u8 dtype (1 = f64),
//     u8 ndim, u32 dims[ndim], u64 byte_len, payload
//   u32 CRC-32 of every preceding byte
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// A restorer with everything needed to run it. Stage-2 bundles carry the
// Stage-1 net as the anchor that produces z0.
struct ModelBundle {
  training::Stage stage = training::Stage::Stage1;
  nets::DenoiserNet net;
  std::optional<nets::DenoiserNet> anchor;
  nets::Codec codec;
  int scale = 4;
  std::vector<double> cond;
  int inference_steps = 1;

  bool t_controllable() const { return stage == training::Stage::Stage2 && anchor.has_value(); }
  // Stage-2 knob output, or the plain restoration for the other stages.
  ImageTensor infer(const ImageTensor& lr, double t) const;
};

Checkpoint pack_bundle(const ModelBundle& bundle, CheckpointMeta meta);
ModelBundle unpack_bundle(const Checkpoint& ckpt);

// --- reports -------------------------------------------------------------

// Shortest round-trip decimal, independent of the locale.
std::string format_number(double v);

// Header "<key_name>,psnr,ssim,percep,toy_fid", one row per MetricRow.
std::string format_report(std::string_view key_name, std::span<const eval::MetricRow> rows);
// Same layout with a text key per row.
std::string format_named_report(std::string_view key_name, std::span<const std::string> names,
                                std::span<const eval::MetricRow> rows);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::vector<std::string> outputs;
  std::string started;  // wall clock, UTC
};

std::string code_version();
std::string utc_now();
// Writes <path>.manifest.json next to an output file.
void write_manifest(const std::filesystem::path& output, const Manifest& m);

// --- command line --------------------------------------------------------

// Returns the process exit code. Errors print one line "error <code>: <msg>"
// on stderr; usage problems exit 2.
int run_cli(int argc, const char* const* argv);

}  // namespace tsr::harness
