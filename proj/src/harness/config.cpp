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
#include <openssl/evp.h>

#include <cmath>
#include <set>
#include <string>

#include "tsr/harness.hpp"
#include "tsr/io.hpp"

namespace tsr::harness {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::ParseError, where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw std::invalid_argument("number expected");
        out = it->template get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("boolean expected");
        out = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("integer expected");
        if (std::is_unsigned_v<T> && !it->is_number_unsigned()) throw std::invalid_argument("non-negative integer expected");
        out = it->template get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw std::invalid_argument("string expected");
        out = it->template get<std::string>();
      } else {
        if (!it->is_array()) throw std::invalid_argument("array expected");
        for (const auto& v : *it) {
          if (!v.is_number()) throw std::invalid_argument("array of numbers expected");
        }
        out = it->template get<T>();
      }
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::ParseError, "field " + field(key) + ": " + e.what());
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, "field " + field(key) + ": " + e.what());
    }
  }

  template <std::size_t N>
  void get(const char* key, std::array<double, N>& out) {
    std::vector<double> v(out.begin(), out.end());
    get(key, v);
    if (v.size() != N) fail(ErrorCode::ParseError, "field " + field(key) + ": expected " + std::to_string(N) + " numbers");
    std::copy(v.begin(), v.end(), out.begin());
  }

  // Child object, or nullopt when absent.
  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) fail(ErrorCode::ParseError, "unknown key " + field(it.key()));
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config root" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_train(Section s, training::TrainConfig& t) {
  s.get("lr", t.lr);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("eps", t.eps);
  s.get("weight_decay", t.weight_decay);
  s.get("steps", t.steps);
  s.get("batch_size", t.batch_size);
  s.get("seed", t.seed);
  s.get("use_adapter", t.use_adapter);
  s.get("adapter_rank", t.adapter_rank);
  s.get("adapter_scale", t.adapter_scale);
  s.get("checkpoint_every", t.checkpoint_every);
  s.finish();
}

json train_json(const training::TrainConfig& t) {
  return {{"lr", t.lr},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"weight_decay", t.weight_decay},
          {"steps", t.steps},
          {"batch_size", t.batch_size},
          {"seed", t.seed},
          {"use_adapter", t.use_adapter},
          {"adapter_rank", t.adapter_rank},
          {"adapter_scale", t.adapter_scale},
          {"checkpoint_every", t.checkpoint_every}};
}

void read_teacher(Section s, TeacherSection& t) {
  if (auto c = s.child("restorer")) read_train(*c, t.restorer);
  if (auto c = s.child("eps")) read_train(*c, t.eps);
  s.get("percep_weight", t.percep_weight);
  s.finish();
}

json teacher_json(const TeacherSection& t) {
  return {{"restorer", train_json(t.restorer)}, {"eps", train_json(t.eps)}, {"percep_weight", t.percep_weight}};
}

TeacherSection teacher_defaults(const training::TeacherSpec& spec) {
  return {spec.restorer, spec.eps, spec.percep_weight};
}

std::string codec_kind_name(nets::CodecKind k) { return k == nets::CodecKind::Identity ? "identity" : "learned"; }

nets::CodecKind codec_kind_from(const std::string& s) {
  if (s == "identity") return nets::CodecKind::Identity;
  if (s == "learned") return nets::CodecKind::Learned;
  fail(ErrorCode::ValidationError, "codec.kind must be 'identity' or 'learned', got '" + s + "'");
}

std::string form_name(losses::ControlForm f) { return f == losses::ControlForm::AtZ0 ? "at_z0" : "at_noised"; }

losses::ControlForm form_from(const std::string& s) {
  if (s == "at_z0") return losses::ControlForm::AtZ0;
  if (s == "at_noised") return losses::ControlForm::AtNoised;
  fail(ErrorCode::ValidationError, "stage2_control_form must be 'at_z0' or 'at_noised', got '" + s + "'");
}

void check_grid(const std::vector<double>& g, const char* name) {
  if (g.empty()) fail(ErrorCode::ValidationError, std::string(name) + " must not be empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 0.0 && g[i] <= 1.0)) fail(ErrorCode::ValidationError, std::string(name) + " entries must lie in [0,1]");
    if (i > 0 && !(g[i] > g[i - 1])) fail(ErrorCode::ValidationError, std::string(name) + " must be strictly increasing");
  }
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace

void ExperimentConfig::validate() const {
  degradation.validate();
  patch.validate();
  net.validate();
  weights.validate();
  if (patch.size % degradation.scale != 0) {
    fail(ErrorCode::ValidationError, "patch.size must be divisible by degradation.scale");
  }
  if (codec.kind == nets::CodecKind::Learned) {
    if (codec.latent_channels < 1 || codec.factor < 1) {
      fail(ErrorCode::ValidationError, "codec.latent_channels and codec.factor must be >= 1");
    }
    if (patch.size % codec.factor != 0) fail(ErrorCode::ValidationError, "patch.size must be divisible by codec.factor");
    if (codec.steps < 0 || !(codec.lr > 0.0)) fail(ErrorCode::ValidationError, "codec.steps must be >= 0 and codec.lr > 0");
  }
  const int latent = codec.kind == nets::CodecKind::Identity ? 3 : codec.latent_channels;
  if (net.channels != latent) {
    fail(ErrorCode::ValidationError, "net.channels must equal the codec's latent channel count (" +
                                         std::to_string(latent) + ")");
  }
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) fail(ErrorCode::ValidationError, "noise_std must be > 0");
  for (const auto* t : {&teacher_f, &teacher_r}) {
    t->restorer.validate();
    t->eps.validate();
    if (!(t->percep_weight >= 0.0)) fail(ErrorCode::ValidationError, "teacher percep_weight must be >= 0");
  }
  stage1.validate();
  stage2.validate();
  if (inference_steps < 1) fail(ErrorCode::ValidationError, "inference_steps must be >= 1");
  check_grid(t_grid, "t_grid");
  check_grid(alpha_grid, "alpha_grid");
  if (data.train_images < 1 || data.test_images < 1) fail(ErrorCode::ValidationError, "data image counts must be >= 1");
  if (data.image_size < patch.size) fail(ErrorCode::ValidationError, "data.image_size must be >= patch.size");
  if (data.train_pairs < 1 || data.test_pairs < 1) fail(ErrorCode::ValidationError, "data pair counts must be >= 1");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.teacher_f = teacher_defaults(training::fidelity_teacher_spec());
  c.teacher_r = teacher_defaults(training::realness_teacher_spec());
  c.stage1.steps = 20000;
  c.stage1.seed = 301;
  c.stage1.stage = training::Stage::Stage1;
  c.stage1.use_adapter = true;
  c.stage2.steps = 50000;
  c.stage2.seed = 401;
  c.stage2.stage = training::Stage::Stage2;
  c.stage2.use_adapter = true;
  c.t_grid = eval::default_t_grid();
  c.alpha_grid = eval::default_alpha_grid();
  c.hash = config_hash(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& d = c.degradation;
  return {
      {"seed", c.seed},
      {"degradation",
       {{"blur_sigma_range", d.blur_sigma_range},
        {"kernel_size", d.kernel_size},
        {"scale", d.scale},
        {"noise_sigma_range", d.noise_sigma_range},
        {"seed", d.seed}}},
      {"patch", {{"size", c.patch.size}, {"stride", c.patch.stride}, {"seed", c.patch.seed}}},
      {"net",
       {{"channels", c.net.channels},
        {"width", c.net.width},
        {"depth", c.net.depth},
        {"t_embed_dim", c.net.t_embed_dim},
        {"cond_dim", c.net.cond_dim}}},
      {"codec",
       {{"kind", codec_kind_name(c.codec.kind)},
        {"latent_channels", c.codec.latent_channels},
        {"factor", c.codec.factor},
        {"steps", c.codec.steps},
        {"lr", c.codec.lr},
        {"seed", c.codec.seed}}},
      {"loss",
       {{"lambda_l2", c.weights.lambda_l2},
        {"lambda_lp", c.weights.lambda_lp},
        {"lambda_fl", c.weights.lambda_fl},
        {"lambda_rn", c.weights.lambda_rn},
        {"gamma_time", c.weights.gamma_time}}},
      {"noise_std", c.noise_std},
      {"teacher_f", teacher_json(c.teacher_f)},
      {"teacher_r", teacher_json(c.teacher_r)},
      {"stage1", train_json(c.stage1)},
      {"stage2", train_json(c.stage2)},
      {"stage2_control_form", form_name(c.control_form)},
      {"inference_steps", c.inference_steps},
      {"t_grid", c.t_grid},
      {"alpha_grid", c.alpha_grid},
      {"data",
       {{"train_corpus", c.data.train_corpus},
        {"test_corpus", c.data.test_corpus},
        {"train_images", c.data.train_images},
        {"test_images", c.data.test_images},
        {"image_size", c.data.image_size},
        {"train_image_seed", c.data.train_image_seed},
        {"test_image_seed", c.data.test_image_seed},
        {"train_pairs", c.data.train_pairs},
        {"test_pairs", c.data.test_pairs},
        {"test_seed", c.data.test_seed}}},
      {"output_dir", c.output_dir},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = to_json(cfg).dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canon.data(), canon.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoFailure, "sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig c = default_config();
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return c;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  Section s(root, "");
  s.get("seed", c.seed);
  if (auto d = s.child("degradation")) {
    d->get("blur_sigma_range", c.degradation.blur_sigma_range);
    d->get("kernel_size", c.degradation.kernel_size);
    d->get("scale", c.degradation.scale);
    d->get("noise_sigma_range", c.degradation.noise_sigma_range);
    d->get("seed", c.degradation.seed);
    d->finish();
  }
  if (auto p = s.child("patch")) {
    p->get("size", c.patch.size);
    p->get("stride", c.patch.stride);
    p->get("seed", c.patch.seed);
    p->finish();
  }
  if (auto n = s.child("net")) {
    n->get("channels", c.net.channels);
    n->get("width", c.net.width);
    n->get("depth", c.net.depth);
    n->get("t_embed_dim", c.net.t_embed_dim);
    n->get("cond_dim", c.net.cond_dim);
    n->finish();
  }
  if (auto k = s.child("codec")) {
    std::string kind = codec_kind_name(c.codec.kind);
    k->get("kind", kind);
    c.codec.kind = codec_kind_from(kind);
    k->get("latent_channels", c.codec.latent_channels);
    k->get("factor", c.codec.factor);
    k->get("steps", c.codec.steps);
    k->get("lr", c.codec.lr);
    k->get("seed", c.codec.seed);
    k->finish();
  }
  if (auto l = s.child("loss")) {
    l->get("lambda_l2", c.weights.lambda_l2);
    l->get("lambda_lp", c.weights.lambda_lp);
    l->get("lambda_fl", c.weights.lambda_fl);
    l->get("lambda_rn", c.weights.lambda_rn);
    l->get("gamma_time", c.weights.gamma_time);
    l->finish();
  }
  s.get("noise_std", c.noise_std);
  if (auto t = s.child("teacher_f")) read_teacher(*t, c.teacher_f);
  if (auto t = s.child("teacher_r")) read_teacher(*t, c.teacher_r);
  if (auto t = s.child("stage1")) read_train(*t, c.stage1);
  if (auto t = s.child("stage2")) read_train(*t, c.stage2);
  std::string form = form_name(c.control_form);
  s.get("stage2_control_form", form);
  c.control_form = form_from(form);
  s.get("inference_steps", c.inference_steps);
  s.get("t_grid", c.t_grid);
  s.get("alpha_grid", c.alpha_grid);
  if (auto d = s.child("data")) {
    d->get("train_corpus", c.data.train_corpus);
    d->get("test_corpus", c.data.test_corpus);
    d->get("train_images", c.data.train_images);
    d->get("test_images", c.data.test_images);
    d->get("image_size", c.data.image_size);
    d->get("train_image_seed", c.data.train_image_seed);
    d->get("test_image_seed", c.data.test_image_seed);
    d->get("train_pairs", c.data.train_pairs);
    d->get("test_pairs", c.data.test_pairs);
    d->get("test_seed", c.data.test_seed);
    d->finish();
  }
  s.get("output_dir", c.output_dir);
  s.finish();
  c.validate();
  c.hash = config_hash(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_config_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

training::TeacherSpec teacher_spec(const ExperimentConfig& cfg, training::Stage pole) {
  training::TeacherSpec s = pole == training::Stage::TeacherF ? training::fidelity_teacher_spec()
                                                              : training::realness_teacher_spec();
  const TeacherSection& t = pole == training::Stage::TeacherF ? cfg.teacher_f : cfg.teacher_r;
  s.net = cfg.net;
  s.restorer = t.restorer;
  s.eps = t.eps;
  s.percep_weight = t.percep_weight;
  s.noise_std = cfg.noise_std;
  s.scale = cfg.degradation.scale;
  return s;
}

training::Stage1Spec stage1_spec(const ExperimentConfig& cfg) {
  training::Stage1Spec s;
  s.train = cfg.stage1;
  s.weights = cfg.weights;
  s.noise_std = cfg.noise_std;
  s.scale = cfg.degradation.scale;
  return s;
}

training::Stage2Spec stage2_spec(const ExperimentConfig& cfg) {
  training::Stage2Spec s;
  s.train = cfg.stage2;
  s.form = cfg.control_form;
  s.scale = cfg.degradation.scale;
  return s;
}

}  // namespace tsr::harness
