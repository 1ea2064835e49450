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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tsr/harness.hpp"

namespace httplib {
class Server;
}

namespace tsr::service {

struct ModelEntry {
  harness::CheckpointMeta meta;
  std::shared_ptr<const harness::ModelBundle> bundle;
};

// Immutable once published to a Service.
class ModelRegistry {
 public:
  void add(std::string name, harness::CheckpointMeta meta, harness::ModelBundle bundle);

  std::vector<std::string> names() const;  // sorted
  const ModelEntry* find(const std::string& name) const;
  // Latest Stage-2 snapshot (highest step, then last name); otherwise the
  // last name. Empty when the registry is empty.
  std::string default_model() const;
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, ModelEntry> entries_;
};

// Every *.ckpt in dir, named by file stem.
ModelRegistry load_registry(const std::filesystem::path& dir);

struct ServiceOptions {
  int max_side = 512;  // input images larger than this in either dimension get 413
};

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws InvalidArgument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

class Service {
 public:
  explicit Service(ServiceOptions options = {}) : options_(options) {}

  // Swaps the registry in one step; requests in flight keep the old one.
  void publish(std::shared_ptr<const ModelRegistry> registry);
  std::shared_ptr<const ModelRegistry> registry() const;

  // Transport-independent dispatch used by the HTTP routes.
  HttpResult handle(std::string_view method, std::string_view path, std::string_view body) const;

  // Registers the routes plus CORS headers on a server.
  void mount(httplib::Server& server) const;

 private:
  HttpResult healthz() const;
  HttpResult models() const;
  HttpResult sr(std::string_view body) const;
  HttpResult blend(std::string_view body) const;

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::shared_ptr<const ModelRegistry> registry_;
};

// Starts listening, loads models_dir in the background (503 until done), and
// blocks until the server stops. Returns false when the port cannot be bound.
bool serve(const std::string& host, int port, const std::filesystem::path& models_dir, ServiceOptions options = {});

}  // namespace tsr::service
