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


#include <filesystem>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "tsr/harness.hpp"
#include "tsr/io.hpp"

using namespace tsr;
using namespace tsr::harness;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "tsr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err;
  auto* old = std::cerr.rdbuf(err.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  return {code, err.str()};
}

std::string text_of(const fs::path& p) {
  const auto b = io::read_file(p);
  return std::string(b.begin(), b.end());
}

// Small end-to-end workspace shared by the pipeline cases.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "tsr_test_cli";
  std::string cfg;

  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    cfg = (dir / "cfg.json").string();
    const nlohmann::json j = {
        {"patch", {{"size", 16}, {"stride", 16}}},
        {"net", {{"width", 6}, {"depth", 1}, {"t_embed_dim", 4}, {"cond_dim", 2}}},
        {"data",
         {{"train_corpus", (dir / "train").string()},
          {"test_corpus", (dir / "test").string()},
          {"train_images", 2},
          {"test_images", 2},
          {"image_size", 32},
          {"train_pairs", 4},
          {"test_pairs", 3}}},
        {"stage1", {{"batch_size", 2}}},
        {"stage2", {{"batch_size", 2}}},
        {"output_dir", (dir / "out").string()}};
    io::write_text_atomic(cfg, j.dump());
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const char* name) const { return (dir / "out" / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2 with a one-line error and usage text") {
  auto r = run({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error ", 0) == 0);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({"sweep-t", "--ckpt", "x.ckpt", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("sweep-t") != std::string::npos);

  r = run({"train-teacher", "--pole", "sideways"});
  CHECK(r.code == 2);

  r = run({});
  CHECK(r.code == 2);
}

TEST_CASE("runtime errors exit 1 with the error code name") {
  const auto r = run({"sweep-t", "--ckpt", "/nonexistent/model.ckpt"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error MissingFile") == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("pipeline: zero-step distillation, knob sweep rows, eval and blend reports") {
  Workspace ws;
  REQUIRE(run({"synth-data", "--config", ws.cfg}).code == 0);
  CHECK(fs::exists(ws.dir / "train" / "toy_0000.png"));
  REQUIRE(run({"train-teacher", "--config", ws.cfg, "--pole", "fidelity", "--steps", "2"}).code == 0);
  REQUIRE(run({"train-teacher", "--config", ws.cfg, "--pole", "realness", "--steps", "2"}).code == 0);
  CHECK(fs::exists(ws.path("teacher_f.ckpt.manifest.json")));

  const std::string s1 = ws.path("stage1.ckpt");
  REQUIRE(run({"distill-stage1", "--config", ws.cfg, "--teacher-f", ws.path("teacher_f.ckpt"), "--teacher-r",
               ws.path("teacher_r.ckpt"), "--steps", "0"})
              .code == 0);
  const auto tr = unpack_bundle(load_checkpoint(ws.path("teacher_r.ckpt")));
  const auto st1 = unpack_bundle(load_checkpoint(s1));
  CHECK(st1.stage == training::Stage::Stage1);
  CHECK(st1.net.params == tr.net.params);

  // Stage 2 checkpoints refuse to be swept when they are not t-controllable.
  CHECK(run({"sweep-t", "--config", ws.cfg, "--ckpt", s1}).code == 1);

  REQUIRE(run({"distill-stage2", "--config", ws.cfg, "--stage1", s1, "--steps", "2"}).code == 0);
  REQUIRE(run({"sweep-t", "--config", ws.cfg, "--ckpt", ws.path("stage2.ckpt")}).code == 0);
  const std::string csv = text_of(ws.path("sweep_t.csv"));
  CHECK(csv.rfind("t,psnr,ssim,percep,toy_fid\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv.find("\n1,") != std::string::npos);

  // Re-running gives the same bytes.
  REQUIRE(run({"sweep-t", "--config", ws.cfg, "--ckpt", ws.path("stage2.ckpt")}).code == 0);
  CHECK(text_of(ws.path("sweep_t.csv")) == csv);

  REQUIRE(run({"eval", "--config", ws.cfg, "--ckpt", s1, "--ckpt", ws.path("stage2.ckpt"), "--t", "0.5"}).code == 0);
  const std::string ev = text_of(ws.path("eval.csv"));
  CHECK(ev.find("\nbicubic,") != std::string::npos);
  CHECK(ev.find("\nstage2,") != std::string::npos);

  REQUIRE(run({"sweep-alpha", "--config", ws.cfg, "--ckpt-f", ws.path("teacher_f.ckpt"), "--ckpt-r",
               ws.path("teacher_r.ckpt")})
              .code == 0);
  const std::string sa = text_of(ws.path("sweep_alpha.csv"));
  CHECK(sa.rfind("alpha,psnr", 0) == 0);
  CHECK(std::count(sa.begin(), sa.end(), '\n') == 7);
}
