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
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "tsr/harness.hpp"
#include "tsr/io.hpp"
#include "tsr/service.hpp"

namespace tsr::harness {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON); defaults when omitted");
  sub->add_option("--out", c.out, "output path");
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed mixed into every stage seed");
}

// A nonzero master seed is mixed into every seed the config carries.
void apply_master_seed(ExperimentConfig& cfg) {
  if (cfg.seed == 0) return;
  auto mix = [&](std::uint64_t& s) { s = derive_seed(cfg.seed, s); };
  mix(cfg.degradation.seed);
  mix(cfg.patch.seed);
  mix(cfg.codec.seed);
  mix(cfg.data.test_seed);
  for (auto* t : {&cfg.teacher_f, &cfg.teacher_r}) {
    mix(t->restorer.seed);
    mix(t->eps.seed);
  }
  mix(cfg.stage1.seed);
  mix(cfg.stage2.seed);
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : parse_config(c.config);
  if (c.seed_opt->count() > 0) cfg.seed = c.seed;
  cfg.hash = config_hash(cfg);
  apply_master_seed(cfg);
  return cfg;
}

fs::path out_path(const Common& c, const ExperimentConfig& cfg, const char* fallback) {
  return c.out.empty() ? fs::path(cfg.output_dir) / fallback : fs::path(c.out);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<degradation::TrainingPair> train_pairs(const ExperimentConfig& cfg) {
  return degradation::synth_dataset(cfg.data.train_corpus, cfg.degradation, cfg.patch,
                                    static_cast<std::size_t>(cfg.data.train_pairs));
}

std::vector<degradation::TrainingPair> test_pairs(const ExperimentConfig& cfg) {
  auto deg = cfg.degradation;
  auto patch = cfg.patch;
  deg.seed = cfg.data.test_seed;
  patch.seed = cfg.data.test_seed;
  return degradation::synth_dataset(cfg.data.test_corpus, deg, patch, static_cast<std::size_t>(cfg.data.test_pairs));
}

nets::Codec make_codec(const ExperimentConfig& cfg, std::span<const degradation::TrainingPair> data) {
  if (cfg.codec.kind == nets::CodecKind::Identity) return nets::identity_codec(3);
  nets::Codec codec = nets::init_learned_codec(cfg.codec.seed, 3, cfg.codec.latent_channels, cfg.codec.factor);
  std::vector<ImageTensor> patches;
  for (const auto& p : data) patches.push_back(p.gt);
  nets::train_codec(codec, patches, cfg.codec.steps, cfg.codec.lr, cfg.codec.seed);
  return codec;
}

ModelBundle load_bundle(const std::string& path, CheckpointMeta* meta = nullptr) {
  const Checkpoint ck = load_checkpoint(path);
  if (meta != nullptr) *meta = ck.meta;
  return unpack_bundle(ck);
}

bool same_codec(const nets::Codec& a, const nets::Codec& b) {
  return a.kind == b.kind && a.factor == b.factor && a.latent_channels == b.latent_channels &&
         a.image_channels == b.image_channels && a.params == b.params;
}

CheckpointMeta meta_for(const ExperimentConfig& cfg, long step, std::uint64_t seed) {
  CheckpointMeta m;
  m.config_hash = cfg.hash;
  m.step = step;
  m.seed = seed;
  return m;
}

void finish(const fs::path& out, const std::string& command, const ExperimentConfig& cfg,
            std::vector<std::pair<std::string, std::uint64_t>> seeds, const std::string& started) {
  Manifest m{command, cfg.hash, std::move(seeds), {out.string()}, started};
  write_manifest(out, m);
  std::printf("wrote %s\n", out.string().c_str());
}

struct Split {
  std::vector<ImageTensor> lr, gt;
};

Split split(const std::vector<degradation::TrainingPair>& pairs) {
  Split s;
  for (const auto& p : pairs) {
    s.lr.push_back(p.lr);
    s.gt.push_back(p.gt);
  }
  return s;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Controllable fidelity/realness super-resolution: data, training, evaluation and serving", "tsr"};
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  Common c;
  std::string pole, teacher_f, teacher_r, stage1, ckpt_f, ckpt_r, models_dir, host = "127.0.0.1";
  std::vector<std::string> ckpts;
  std::string ckpt;
  int steps = -1;
  double t_eval = 0.0;
  int port = 8080;

  auto* synth = app.add_subcommand("synth-data", "write the procedural train/test corpora");
  auto* teach = app.add_subcommand("train-teacher", "pretrain the fidelity or realness teacher");
  teach->add_option("--pole", pole, "fidelity | realness")->required()->check(CLI::IsMember({"fidelity", "realness"}));
  teach->add_option("--steps", steps, "override restorer and joint-phase step counts");
  auto* s1 = app.add_subcommand("distill-stage1", "dual-teacher distillation of the student");
  s1->add_option("--teacher-f", teacher_f, "fidelity teacher checkpoint")->required();
  s1->add_option("--teacher-r", teacher_r, "realness teacher checkpoint")->required();
  s1->add_option("--steps", steps, "override the stage-1 step count");
  auto* s2 = app.add_subcommand("distill-stage2", "distill the stage-1 model into the t-controllable flow");
  s2->add_option("--stage1", stage1, "stage-1 checkpoint")->required();
  s2->add_option("--steps", steps, "override the stage-2 step count");
  auto* ev = app.add_subcommand("eval", "metrics of checkpoints (and bicubic) on the test set");
  ev->add_option("--ckpt", ckpts, "checkpoints to evaluate")->required();
  ev->add_option("--t", t_eval, "knob value for stage-2 checkpoints")->check(CLI::Range(0.0, 1.0));
  auto* sa = app.add_subcommand("sweep-alpha", "linear blend sweep between two restorers");
  sa->add_option("--ckpt-f", ckpt_f, "fidelity-side checkpoint")->required();
  sa->add_option("--ckpt-r", ckpt_r, "realness-side checkpoint")->required();
  auto* st = app.add_subcommand("sweep-t", "knob sweep of a stage-2 checkpoint");
  st->add_option("--ckpt", ckpt, "stage-2 checkpoint")->required();
  auto* sv = app.add_subcommand("serve", "HTTP inference service");
  sv->add_option("--models-dir", models_dir, "directory of *.ckpt files")->required();
  sv->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  sv->add_option("--host", host, "bind address");
  for (auto* sub : {synth, teach, s1, s2, ev, sa, st, sv}) add_common(sub, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const bool no_sub = app.get_subcommands().empty();
    const ErrorCode code = no_sub ? ErrorCode::UnknownSubcommand : ErrorCode::UsageError;
    std::cerr << "error " << to_string(code) << ": " << one_line(e.what()) << "\n";
    std::cerr << (no_sub ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  try {
    const ExperimentConfig cfg = load_config(c);
    const std::string started = utc_now();
    const losses::PercepExtractor ex;

    if (synth->parsed()) {
      const fs::path base = c.out.empty() ? fs::path() : fs::path(c.out);
      const fs::path train_dir = c.out.empty() ? fs::path(cfg.data.train_corpus) : base / "train";
      const fs::path test_dir = c.out.empty() ? fs::path(cfg.data.test_corpus) : base / "test";
      degradation::make_toy_corpus(train_dir, cfg.data.train_images, cfg.data.image_size, cfg.data.train_image_seed);
      degradation::make_toy_corpus(test_dir, cfg.data.test_images, cfg.data.image_size, cfg.data.test_image_seed);
      Manifest m{"synth-data", cfg.hash,
                 {{"train_images", cfg.data.train_image_seed}, {"test_images", cfg.data.test_image_seed}},
                 {train_dir.string(), test_dir.string()}, started};
      write_manifest(c.out.empty() ? train_dir : base, m);
      std::printf("wrote %s and %s\n", train_dir.string().c_str(), test_dir.string().c_str());
      return 0;
    }

    if (teach->parsed()) {
      const auto stage = pole == "fidelity" ? training::Stage::TeacherF : training::Stage::TeacherR;
      auto spec = teacher_spec(cfg, stage);
      if (steps >= 0) spec.restorer.steps = spec.eps.steps = steps;
      const auto data = train_pairs(cfg);
      ModelBundle b;
      b.stage = stage;
      b.codec = make_codec(cfg, data);
      b.scale = spec.scale;
      b.cond = spec.cond;
      b.net = training::pretrain_teacher(data, spec, b.codec, ex).teacher.net;
      const fs::path out = out_path(c, cfg, stage == training::Stage::TeacherF ? "teacher_f.ckpt" : "teacher_r.ckpt");
      ensure_parent(out);
      save_checkpoint(pack_bundle(b, meta_for(cfg, spec.restorer.steps + spec.eps.steps, spec.restorer.seed)), out);
      finish(out, "train-teacher", cfg, {{"restorer", spec.restorer.seed}, {"eps", spec.eps.seed}}, started);
      return 0;
    }

    if (s1->parsed()) {
      const ModelBundle tf = load_bundle(teacher_f);
      const ModelBundle tr = load_bundle(teacher_r);
      if (!same_codec(tf.codec, tr.codec)) fail(ErrorCode::ValidationError, "teachers were trained with different codecs");
      if (tf.scale != tr.scale) fail(ErrorCode::ValidationError, "teachers disagree on the upscaling factor");
      auto spec = stage1_spec(cfg);
      if (steps >= 0) spec.train.steps = steps;
      spec.scale = tr.scale;
      spec.cond = tr.cond;
      ModelBundle b = tr;
      b.stage = training::Stage::Stage1;
      if (spec.train.steps > 0) {
        const auto data = train_pairs(cfg);
        b.net = training::run_stage1(data, {tf.net}, {tr.net}, spec, tr.codec, ex).student;
      }
      const fs::path out = out_path(c, cfg, "stage1.ckpt");
      ensure_parent(out);
      save_checkpoint(pack_bundle(b, meta_for(cfg, spec.train.steps, spec.train.seed)), out);
      finish(out, "distill-stage1", cfg, {{"stage1", spec.train.seed}}, started);
      return 0;
    }

    if (s2->parsed()) {
      const ModelBundle s1b = load_bundle(stage1);
      auto spec = stage2_spec(cfg);
      if (steps >= 0) spec.train.steps = steps;
      spec.scale = s1b.scale;
      spec.cond = s1b.cond;
      const auto data = train_pairs(cfg);
      const auto pool = training::stage1_latents(s1b.net, data, s1b.codec, spec.scale, spec.cond);
      ModelBundle b = s1b;
      b.stage = training::Stage::Stage2;
      b.anchor = s1b.net;
      b.net = training::run_stage2(s1b.net, pool, spec).student;
      b.inference_steps = cfg.inference_steps;
      const fs::path out = out_path(c, cfg, "stage2.ckpt");
      ensure_parent(out);
      save_checkpoint(pack_bundle(b, meta_for(cfg, spec.train.steps, spec.train.seed)), out);
      finish(out, "distill-stage2", cfg, {{"stage2", spec.train.seed}}, started);
      return 0;
    }

    auto run_all = [](const ModelBundle& b, const Split& test, double t) {
      std::vector<ImageTensor> out;
      for (const auto& lr : test.lr) out.push_back(b.infer(lr, t));
      return out;
    };

    // Checkpoints are loaded before the test set so a bad path is reported first.
    if (ev->parsed()) {
      std::vector<ModelBundle> models;
      for (const auto& path : ckpts) models.push_back(load_bundle(path));
      const Split test = split(test_pairs(cfg));
      std::vector<std::string> names{"bicubic"};
      std::vector<ImageTensor> bic;
      for (const auto& lr : test.lr) bic.push_back(imaging::resize_bicubic(lr, cfg.degradation.scale));
      std::vector<eval::MetricRow> rows{eval::measure(0.0, bic, test.gt, ex)};
      for (std::size_t i = 0; i < ckpts.size(); ++i) {
        names.push_back(fs::path(ckpts[i]).stem().string());
        rows.push_back(eval::measure(t_eval, run_all(models[i], test, t_eval), test.gt, ex));
      }
      const fs::path out = out_path(c, cfg, "eval.csv");
      ensure_parent(out);
      io::write_text_atomic(out, format_named_report("model", names, rows));
      finish(out, "eval", cfg, {{"test", cfg.data.test_seed}}, started);
      return 0;
    }

    if (sa->parsed()) {
      const ModelBundle bf = load_bundle(ckpt_f), br = load_bundle(ckpt_r);
      const Split test = split(test_pairs(cfg));
      const auto xf = run_all(bf, test, 0.0);
      const auto xr = run_all(br, test, 0.0);
      const auto rows = eval::sweep_alpha(xf, xr, test.gt, cfg.alpha_grid, ex);
      const fs::path out = out_path(c, cfg, "sweep_alpha.csv");
      ensure_parent(out);
      io::write_text_atomic(out, format_report("alpha", rows));
      finish(out, "sweep-alpha", cfg, {{"test", cfg.data.test_seed}}, started);
      return 0;
    }

    if (st->parsed()) {
      const ModelBundle b = load_bundle(ckpt);
      if (!b.t_controllable()) fail(ErrorCode::ValidationError, "sweep-t needs a stage2 checkpoint, got " + to_string(b.stage));
      const Split test = split(test_pairs(cfg));
      const eval::KnobModels km{diffusion::handle(b.net), diffusion::handle(*b.anchor), &b.codec, b.scale, b.cond,
                                b.inference_steps};
      const auto rows = eval::sweep_t(km, test.lr, test.gt, cfg.t_grid, ex);
      const fs::path out = out_path(c, cfg, "sweep_t.csv");
      ensure_parent(out);
      io::write_text_atomic(out, format_report("t", rows));
      finish(out, "sweep-t", cfg, {{"test", cfg.data.test_seed}}, started);
      return 0;
    }

    if (sv->parsed()) {
      std::printf("serving %s on %s:%d\n", models_dir.c_str(), host.c_str(), port);
      std::fflush(stdout);
      if (!service::serve(host, port, models_dir)) fail(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error " << to_string(ErrorCode::IoFailure) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tsr::harness
