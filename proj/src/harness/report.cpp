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
#include <charconv>
#include <chrono>
#include <ctime>

#include "tsr/harness.hpp"
#include "tsr/io.hpp"

#ifndef TSR_VERSION
#define TSR_VERSION "0.0.0"
#endif

namespace tsr::harness {

namespace {

void append_row(std::string& out, std::string_view key, const eval::MetricRow& r) {
  out.append(key);
  for (double v : {r.psnr, r.ssim, r.percep, r.toy_fid}) {
    out.push_back(',');
    out.append(format_number(v));
  }
  out.push_back('\n');
}

std::string header(std::string_view key_name) { return std::string(key_name) + ",psnr,ssim,percep,toy_fid\n"; }

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_report(std::string_view key_name, std::span<const eval::MetricRow> rows) {
  std::string out = header(key_name);
  for (const auto& r : rows) append_row(out, format_number(r.key), r);
  return out;
}

std::string format_named_report(std::string_view key_name, std::span<const std::string> names,
                                std::span<const eval::MetricRow> rows) {
  if (names.size() != rows.size()) fail(ErrorCode::LengthMismatch, "report needs one name per row");
  std::string out = header(key_name);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (names[i].find_first_of(",\n\"") != std::string::npos) {
      fail(ErrorCode::InvalidArgument, "report key '" + names[i] + "' needs CSV quoting");
    }
    append_row(out, names[i], rows[i]);
  }
  return out;
}

std::string code_version() { return TSR_VERSION; }

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& output, const Manifest& m) {
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [name, seed] : m.seeds) seeds[name] = seed;
  const nlohmann::json j = {{"command", m.command}, {"config_hash", m.config_hash}, {"seeds", seeds},
                            {"outputs", m.outputs}, {"code_version", code_version()}, {"started", m.started}};
  io::write_text_atomic(output.string() + ".manifest.json", j.dump(2) + "\n");
}

}  // namespace tsr::harness
