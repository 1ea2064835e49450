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


#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"
#include "tsr/imaging.hpp"
#include "tsr/service.hpp"

using namespace tsr;
using namespace tsr::service;
using nlohmann::json;

namespace {

nets::NetConfig small_net() {
  nets::NetConfig cfg;
  cfg.width = 6;
  cfg.depth = 1;
  cfg.t_embed_dim = 4;
  cfg.cond_dim = 2;
  return cfg;
}

harness::ModelBundle bundle(training::Stage stage, std::uint64_t seed) {
  Rng rng(seed);
  harness::ModelBundle b;
  b.stage = stage;
  b.net = nets::init_denoiser(seed, small_net());
  testing::randomize(b.net.params, rng, 0.05);
  if (stage == training::Stage::Stage2) {
    b.anchor = nets::init_denoiser(seed + 1, small_net());
    testing::randomize(b.anchor->params, rng, 0.05);
  }
  b.codec = nets::identity_codec(3);
  return b;
}

std::shared_ptr<const ModelRegistry> registry() {
  auto reg = std::make_shared<ModelRegistry>();
  harness::CheckpointMeta m1, m2a, m2b;
  m1.stage = "stage1";
  m2a.stage = m2b.stage = "stage2";
  m2a.step = 100;
  m2b.step = 50;
  reg->add("zeta_stage1", m1, bundle(training::Stage::Stage1, 1));
  reg->add("alpha_stage2", m2a, bundle(training::Stage::Stage2, 2));
  reg->add("beta_stage2", m2b, bundle(training::Stage::Stage2, 4));
  return reg;
}

std::string png_b64(const ImageTensor& img) { return base64_encode(imaging::encode_png(img)); }

ImageTensor decode_b64(const std::string& s) { return imaging::decode_png(base64_decode(s)); }

const ImageTensor& lr_image() {
  static const ImageTensor img = [] {
    Rng rng(9);
    return imaging::decode_png(imaging::encode_png(testing::random_tensor(rng, {3, 8, 8})));
  }();
  return img;
}

}  // namespace

TEST_CASE("base64 round trip and malformed input") {
  const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 252, 253};
  for (std::size_t n = 0; n <= bytes.size(); ++n) {
    const std::span<const std::uint8_t> part(bytes.data(), n);
    const auto back = base64_decode(base64_encode(part));
    CHECK(std::vector<std::uint8_t>(part.begin(), part.end()) == back);
  }
  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
  CHECK_THROWS_AS(base64_decode("abc"), Error);
  CHECK_THROWS_AS(base64_decode("ab!?"), Error);
}

TEST_CASE("registry: sorted names and default model") {
  const auto reg = registry();
  CHECK(reg->names() == std::vector<std::string>{"alpha_stage2", "beta_stage2", "zeta_stage1"});
  CHECK(reg->default_model() == "alpha_stage2");
  ModelRegistry only_s1;
  only_s1.add("b", {}, bundle(training::Stage::Stage1, 1));
  only_s1.add("a", {}, bundle(training::Stage::Stage1, 2));
  CHECK(only_s1.default_model() == "b");
  CHECK(ModelRegistry{}.default_model().empty());
}

TEST_CASE("service is unavailable before the registry is published") {
  Service svc;
  CHECK(svc.handle("GET", "/healthz", "").status == 503);
  CHECK(svc.handle("GET", "/models", "").status == 503);
  const json req = {{"image", png_b64(lr_image())}, {"t_knob", 0.5}};
  CHECK(svc.handle("POST", "/sr", req.dump()).status == 503);
  svc.publish(registry());
  const auto h = svc.handle("GET", "/healthz", "");
  CHECK(h.status == 200);
  CHECK(json::parse(h.body).at("status") == "ok");
}

TEST_CASE("GET /models lists every model with its stage and default flag") {
  Service svc;
  svc.publish(registry());
  const auto r = svc.handle("GET", "/models", "");
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  REQUIRE(j.size() == 3);
  CHECK(j[0].at("name") == "alpha_stage2");
  CHECK(j[0].at("default") == true);
  CHECK(j[0].at("t_controllable") == true);
  CHECK(j[0].at("step") == 100);
  CHECK(j[2].at("name") == "zeta_stage1");
  CHECK(j[2].at("t_controllable") == false);
  CHECK(j[1].at("default") == false);
}

TEST_CASE("POST /sr is deterministic and matches the bundle") {
  Service svc;
  svc.publish(registry());
  const json req = {{"image", png_b64(lr_image())}, {"t_knob", 0.4}, {"model", "beta_stage2"}};
  const auto a = svc.handle("POST", "/sr", req.dump());
  const auto b = svc.handle("POST", "/sr", req.dump());
  REQUIRE(a.status == 200);
  const json ja = json::parse(a.body), jb = json::parse(b.body);
  CHECK(ja.at("image") == jb.at("image"));
  CHECK(ja.at("model") == "beta_stage2");
  CHECK(ja.at("t_knob") == 0.4);
  CHECK(ja.contains("timing_ms"));
  const ImageTensor out = decode_b64(ja.at("image"));
  CHECK(out.shape() == Shape{3, 32, 32});
  const auto& model = *svc.registry()->find("beta_stage2")->bundle;
  CHECK(out == imaging::decode_png(imaging::encode_png(model.infer(lr_image(), 0.4))));

  // Default model, and gt metrics on the returned image.
  const json with_gt = {{"image", png_b64(lr_image())}, {"t_knob", 0.0}, {"gt", png_b64(out)}};
  const auto g = svc.handle("POST", "/sr", with_gt.dump());
  REQUIRE(g.status == 200);
  const json jg = json::parse(g.body);
  CHECK(jg.at("model") == "alpha_stage2");
  CHECK(jg.at("metrics").contains("psnr"));
  CHECK(jg.at("metrics").contains("ssim"));
}

TEST_CASE("POST /sr validation errors") {
  Service svc(ServiceOptions{16});
  svc.publish(registry());
  const std::string img = png_b64(lr_image());
  auto status = [&](const json& j) { return svc.handle("POST", "/sr", j.dump()).status; };
  auto field = [&](const json& j) { return json::parse(svc.handle("POST", "/sr", j.dump()).body).value("field", ""); };
  CHECK(status({{"image", img}, {"t_knob", 1.5}}) == 400);
  CHECK(field({{"image", img}, {"t_knob", 1.5}}) == "t_knob");
  CHECK(status({{"image", img}, {"t_knob", -0.1}}) == 400);
  CHECK(status({{"image", img}}) == 400);
  CHECK(status({{"image", img}, {"t_knob", "half"}}) == 400);
  CHECK(status({{"t_knob", 0.5}}) == 400);
  CHECK(status({{"image", "not base64!"}, {"t_knob", 0.5}}) == 400);
  CHECK(status({{"image", base64_encode(std::vector<std::uint8_t>(40, 7))}, {"t_knob", 0.5}}) == 422);
  CHECK(status({{"image", img}, {"t_knob", 0.5}, {"model", "nope"}}) == 404);
  CHECK(status({{"image", png_b64(Tensor::zeros(3, 20, 8))}, {"t_knob", 0.5}}) == 413);
  CHECK(status({{"image", img}, {"t_knob", 0.5}, {"gt", png_b64(Tensor::zeros(3, 8, 8))}}) == 400);
  CHECK(svc.handle("POST", "/sr", "not json").status == 400);
  CHECK(svc.handle("POST", "/sr", "[1,2]").status == 400);
  CHECK(svc.handle("GET", "/sr", "").status == 405);
  CHECK(svc.handle("GET", "/nowhere", "").status == 404);
}

TEST_CASE("POST /blend: endpoints, mid-gray, shape mismatch") {
  const Service svc;
  const std::string black = png_b64(Tensor::zeros(3, 4, 4));
  const std::string white = png_b64(Tensor::filled(3, 4, 4, 1.0));
  auto blend = [&](double a, const std::string& f, const std::string& r) {
    return svc.handle("POST", "/blend", json{{"alpha", a}, {"image_f", f}, {"image_r", r}}.dump());
  };
  const auto mid = blend(0.5, white, black);
  REQUIRE(mid.status == 200);
  const ImageTensor gray = decode_b64(json::parse(mid.body).at("image"));
  for (std::size_t i = 0; i < gray.size(); ++i) CHECK(imaging::quantize_byte(gray.data()[i]) == 128);
  CHECK(decode_b64(json::parse(blend(1.0, white, black).body).at("image")) == Tensor::filled(3, 4, 4, 1.0));
  CHECK(decode_b64(json::parse(blend(0.0, white, black).body).at("image")) == Tensor::zeros(3, 4, 4));
  CHECK(blend(1.2, white, black).status == 400);
  CHECK(blend(0.5, white, png_b64(Tensor::zeros(3, 4, 5))).status == 400);
}

TEST_CASE("HTTP server serves the routes with CORS headers") {
  Service svc;
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto r = client.Get("/healthz");
  REQUIRE(r);
  CHECK(r->status == 503);
  svc.publish(registry());
  r = client.Get("/models");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(json::parse(r->body).size() == 3);

  const json req = {{"image", png_b64(lr_image())}, {"t_knob", 0.6}};
  r = client.Post("/sr", req.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body).at("image") == json::parse(svc.handle("POST", "/sr", req.dump()).body).at("image"));
  r = client.Options("/sr");
  REQUIRE(r);
  CHECK(r->status == 204);

  server.stop();
  th.join();
}
