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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "tsr/eval.hpp"
#include "tsr/imaging.hpp"
#include "tsr/service.hpp"

namespace tsr::service {

using nlohmann::json;

namespace {

HttpResult error_result(int status, const std::string& message, const std::string& field = {}) {
  json j = {{"error", message}};
  if (!field.empty()) j["field"] = field;
  return {status, j.dump()};
}

// Thrown inside handlers and turned into a JSON error reply.
struct HttpError {
  int status;
  std::string message;
  std::string field;
};

[[noreturn]] void reject(int status, std::string message, std::string field = {}) {
  throw HttpError{status, std::move(message), std::move(field)};
}

json parse_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) reject(400, "request body must be a JSON object");
  return j;
}

double number_field(const json& j, const char* key, double lo, double hi) {
  auto it = j.find(key);
  if (it == j.end()) reject(400, std::string(key) + " is required", key);
  if (!it->is_number()) reject(400, std::string(key) + " must be a number", key);
  const double v = it->get<double>();
  if (!(v >= lo && v <= hi)) {
    reject(400, std::string(key) + " must lie in [" + harness::format_number(lo) + "," + harness::format_number(hi) + "]",
           key);
  }
  return v;
}

// PNG width/height from the IHDR chunk, so oversized inputs are refused
// before any decompression.
std::pair<std::uint32_t, std::uint32_t> png_dims(const std::vector<std::uint8_t>& b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (b.size() < 24 || !std::equal(kSig, kSig + 8, b.begin())) return {0, 0};
  auto be32 = [&](std::size_t o) {
    return (std::uint32_t(b[o]) << 24) | (std::uint32_t(b[o + 1]) << 16) | (std::uint32_t(b[o + 2]) << 8) | b[o + 3];
  };
  return {be32(16), be32(20)};
}

ImageTensor to_rgb(ImageTensor img) {
  if (img.channels() == 3) return img;
  ImageTensor out(Shape{3, img.height(), img.width()});
  for (int c = 0; c < 3; ++c) std::copy(img.plane(0), img.plane(0) + img.shape().plane(), out.plane(c));
  return out;
}

ImageTensor image_field(const json& j, const char* key, int max_side) {
  auto it = j.find(key);
  if (it == j.end()) reject(400, std::string(key) + " is required", key);
  if (!it->is_string()) reject(400, std::string(key) + " must be a base64 PNG string", key);
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(it->get_ref<const std::string&>());
  } catch (const Error& e) {
    reject(400, std::string(key) + ": " + e.what(), key);
  }
  const auto [w, h] = png_dims(bytes);
  if (max_side > 0 && (w > static_cast<std::uint32_t>(max_side) || h > static_cast<std::uint32_t>(max_side))) {
    reject(413, std::string(key) + " is " + std::to_string(w) + "x" + std::to_string(h) + ", larger than the " +
                    std::to_string(max_side) + "x" + std::to_string(max_side) + " cap",
           key);
  }
  try {
    return to_rgb(imaging::decode_png(bytes));
  } catch (const Error& e) {
    reject(422, std::string(key) + ": " + e.what(), key);
  }
}

std::string png_b64(const ImageTensor& img) { return base64_encode(imaging::encode_png(img)); }

const losses::PercepExtractor& extractor() {
  static const losses::PercepExtractor ex;
  return ex;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorCode::InvalidArgument, "base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  if (text.empty()) return out;
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) fail(ErrorCode::InvalidArgument, "malformed base64");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

void ModelRegistry::add(std::string name, harness::CheckpointMeta meta, harness::ModelBundle bundle) {
  entries_[std::move(name)] = {std::move(meta), std::make_shared<const harness::ModelBundle>(std::move(bundle))};
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

const ModelEntry* ModelRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string ModelRegistry::default_model() const {
  std::string best;
  long best_step = -1;
  for (const auto& [name, e] : entries_) {
    if (!e.bundle->t_controllable()) continue;
    if (e.meta.step >= best_step) {
      best_step = e.meta.step;
      best = name;
    }
  }
  if (best.empty() && !entries_.empty()) best = entries_.rbegin()->first;
  return best;
}

ModelRegistry load_registry(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::MissingFile, "models directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.is_regular_file() && f.path().extension() == ".ckpt") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  ModelRegistry reg;
  for (const auto& f : files) {
    const auto ck = harness::load_checkpoint(f);
    reg.add(f.stem().string(), ck.meta, harness::unpack_bundle(ck));
  }
  return reg;
}

void Service::publish(std::shared_ptr<const ModelRegistry> registry) {
  std::lock_guard<std::mutex> lock(mu_);
  registry_ = std::move(registry);
}

std::shared_ptr<const ModelRegistry> Service::registry() const {
  std::lock_guard<std::mutex> lock(mu_);
  return registry_;
}

HttpResult Service::handle(std::string_view method, std::string_view path, std::string_view body) const {
  try {
    if (method == "GET" && path == "/healthz") return healthz();
    if (method == "GET" && path == "/models") return models();
    if (method == "POST" && path == "/sr") return sr(body);
    if (method == "POST" && path == "/blend") return blend(body);
    if (path == "/healthz" || path == "/models" || path == "/sr" || path == "/blend") {
      return error_result(405, "method not allowed");
    }
    return error_result(404, "no route for " + std::string(path));
  } catch (const HttpError& e) {
    return error_result(e.status, e.message, e.field);
  } catch (const Error& e) {
    return error_result(500, std::string(to_string(e.code())) + ": " + e.what());
  }
}

HttpResult Service::healthz() const {
  const auto reg = registry();
  if (!reg) return {503, json{{"status", "loading"}, {"version", harness::code_version()}}.dump()};
  return {200, json{{"status", "ok"}, {"version", harness::code_version()}, {"models", reg->names().size()}}.dump()};
}

HttpResult Service::models() const {
  const auto reg = registry();
  if (!reg) return error_result(503, "models are still loading");
  const std::string def = reg->default_model();
  json list = json::array();
  for (const auto& name : reg->names()) {
    const ModelEntry* e = reg->find(name);
    list.push_back({{"name", name},
                    {"stage", e->meta.stage},
                    {"step", e->meta.step},
                    {"t_controllable", e->bundle->t_controllable()},
                    {"default", name == def}});
  }
  return {200, list.dump()};
}

HttpResult Service::sr(std::string_view body) const {
  const auto reg = registry();
  if (!reg) return error_result(503, "models are still loading");
  const json req = parse_body(body);
  const double t = number_field(req, "t_knob", 0.0, 1.0);
  std::string name = reg->default_model();
  if (auto it = req.find("model"); it != req.end()) {
    if (!it->is_string()) reject(400, "model must be a string", "model");
    name = it->get<std::string>();
  }
  if (name.empty()) return error_result(503, "no model loaded");
  const ModelEntry* entry = reg->find(name);
  if (entry == nullptr) reject(404, "unknown model '" + name + "'", "model");
  const ImageTensor lr = image_field(req, "image", options_.max_side);
  std::optional<ImageTensor> gt;
  if (req.contains("gt")) gt = image_field(req, "gt", 0);

  const auto start = std::chrono::steady_clock::now();
  ImageTensor out;
  try {
    out = entry->bundle->infer(lr, t);
  } catch (const Error& e) {
    reject(400, e.what(), "image");
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  json resp = {{"image", png_b64(out)}, {"model", name}, {"t_knob", t}, {"timing_ms", ms}};
  if (gt) {
    if (gt->shape() != out.shape()) {
      reject(400, "gt must be " + to_string(out.shape()) + " to match the output, got " + to_string(gt->shape()), "gt");
    }
    // Metrics are computed on the image the client receives.
    const ImageTensor sent = imaging::decode_png(imaging::encode_png(out));
    json m = {{"psnr", eval::psnr(sent, *gt)}};
    try {
      m["ssim"] = eval::ssim(sent, *gt);
    } catch (const Error&) {
      m["ssim"] = nullptr;
    }
    try {
      m["percep"] = losses::percep_dist(extractor(), sent, *gt);
    } catch (const Error&) {
      m["percep"] = nullptr;
    }
    resp["metrics"] = m;
  }
  return {200, resp.dump()};
}

HttpResult Service::blend(std::string_view body) const {
  const json req = parse_body(body);
  const double alpha = number_field(req, "alpha", 0.0, 1.0);
  const ImageTensor xf = image_field(req, "image_f", options_.max_side);
  const ImageTensor xr = image_field(req, "image_r", options_.max_side);
  if (xf.shape() != xr.shape()) {
    reject(400, "image_f is " + to_string(xf.shape()) + " but image_r is " + to_string(xr.shape()), "image_r");
  }
  return {200, json{{"image", png_b64(eval::linear_blend(xf, xr, alpha))}, {"alpha", alpha}}.dump()};
}

void Service::mount(httplib::Server& server) const {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResult r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  for (const char* p : {"/healthz", "/models"}) server.Get(p, route);
  for (const char* p : {"/sr", "/blend"}) server.Post(p, route);
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

bool serve(const std::string& host, int port, const std::filesystem::path& models_dir, ServiceOptions options) {
  Service svc(options);
  httplib::Server server;
  server.set_payload_max_length(64u << 20);
  svc.mount(server);
  if (!server.bind_to_port(host, port)) return false;
  std::thread loader([&] {
    try {
      svc.publish(std::make_shared<const ModelRegistry>(load_registry(models_dir)));
    } catch (const Error& e) {
      std::fprintf(stderr, "error %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
      server.wait_until_ready();
      server.stop();
    }
  });
  server.listen_after_bind();
  loader.join();
  return true;
}

}  // namespace tsr::service
