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
#include <zlib.h>

#include <bit>
#include <cstring>
#include <limits>

#include "tsr/harness.hpp"
#include "tsr/io.hpp"

namespace tsr::harness {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::uint8_t kDtypeF64 = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > b_.size() - pos_) fail(ErrorCode::IoFailure, "checkpoint truncated at byte " + std::to_string(pos_));
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const uInt n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

json meta_json(const CheckpointMeta& m) {
  return {{"config_hash", m.config_hash}, {"stage", m.stage},     {"step", m.step},
          {"seed", m.seed},               {"created", m.created}, {"model", m.extra}};
}

json net_json(const nets::NetConfig& n) {
  return {{"channels", n.channels},
          {"width", n.width},
          {"depth", n.depth},
          {"t_embed_dim", n.t_embed_dim},
          {"cond_dim", n.cond_dim}};
}

nets::NetConfig net_from(const json& j) {
  nets::NetConfig n;
  n.channels = j.at("channels").get<int>();
  n.width = j.at("width").get<int>();
  n.depth = j.at("depth").get<int>();
  n.t_embed_dim = j.at("t_embed_dim").get<int>();
  n.cond_dim = j.at("cond_dim").get<int>();
  n.validate();
  return n;
}

void add_prefixed(ParamSet& dst, const ParamSet& src, const std::string& prefix) {
  for (const auto& p : src.items()) dst.add(Param{prefix + p.name, p.shape, p.value});
}

ParamSet take_prefixed(const ParamSet& src, const std::string& prefix) {
  ParamSet out;
  for (const auto& p : src.items()) {
    if (p.name.rfind(prefix, 0) == 0) out.add(Param{p.name.substr(prefix.size()), p.shape, p.value});
  }
  return out;
}

// Restores a net from stored arrays, checking that the layout matches what
// the stored config implies.
nets::DenoiserNet net_from_arrays(const nets::NetConfig& cfg, ParamSet arrays, const std::string& what) {
  nets::DenoiserNet net = nets::init_denoiser(0, cfg);
  if (!net.params.same_layout(arrays)) {
    fail(ErrorCode::ShapeMismatch, "checkpoint " + what + " arrays do not match the stored net config");
  }
  net.params = std::move(arrays);
  return net;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string meta = meta_json(ckpt.meta).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& p : ckpt.arrays.items()) {
    if (p.name.size() > std::numeric_limits<std::uint16_t>::max()) fail(ErrorCode::InvalidArgument, "array name too long");
    if (p.shape.size() > 255) fail(ErrorCode::InvalidArgument, "array rank too large");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.put<std::uint8_t>(kDtypeF64);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.shape.size()));
    for (int d : p.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(p.value.size() * sizeof(double)));
    w.bytes(p.value.data(), p.value.size() * sizeof(double));
  }
  const std::uint32_t crc = crc_of(w.buffer());
  w.put<std::uint32_t>(crc);
  return std::move(w.buffer());
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHead = sizeof(kCheckpointMagic) + 4;
  if (bytes.size() < kHead + 4 || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    fail(ErrorCode::UnsupportedFormat, "not a checkpoint file (bad magic)");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kCheckpointMagic), 4);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionUnsupported, "checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                            std::to_string(kCheckpointVersion) + ")");
  }
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc_of(body) != stored) fail(ErrorCode::ChecksumMismatch, "checkpoint checksum mismatch");

  Reader r(body);
  r.take(kHead);
  Checkpoint ck;
  const auto meta_len = r.get<std::uint32_t>();
  const auto* meta_p = r.take(meta_len);
  try {
    const json m = json::parse(meta_p, meta_p + meta_len);
    ck.meta.config_hash = m.at("config_hash").get<std::string>();
    ck.meta.stage = m.at("stage").get<std::string>();
    ck.meta.step = m.at("step").get<long>();
    ck.meta.seed = m.at("seed").get<std::uint64_t>();
    ck.meta.created = m.at("created").get<std::string>();
    ck.meta.extra = m.at("model");
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("checkpoint metadata: ") + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    Param p;
    const auto name_len = r.get<std::uint16_t>();
    const auto* np = r.take(name_len);
    p.name.assign(reinterpret_cast<const char*>(np), name_len);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kDtypeF64) fail(ErrorCode::UnsupportedFormat, "array '" + p.name + "' has unknown dtype");
    const auto ndim = r.get<std::uint8_t>();
    std::uint64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      const auto dim = r.get<std::uint32_t>();
      if (dim == 0 || dim > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        fail(ErrorCode::ParseError, "array '" + p.name + "' has an invalid dimension");
      }
      p.shape.push_back(static_cast<int>(dim));
      count *= dim;
    }
    const auto byte_len = r.get<std::uint64_t>();
    if (byte_len != count * sizeof(double)) {
      fail(ErrorCode::ParseError, "array '" + p.name + "' byte length does not match its shape");
    }
    const auto* data = r.take(byte_len);
    p.value.resize(count);
    std::memcpy(p.value.data(), data, byte_len);
    ck.arrays.add(std::move(p));
  }
  if (!r.done()) fail(ErrorCode::ParseError, "trailing bytes after the last array");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

Checkpoint pack_bundle(const ModelBundle& b, CheckpointMeta meta) {
  meta.stage = training::to_string(b.stage);
  json model = {{"net", net_json(b.net.config)},
                {"codec",
                 {{"kind", b.codec.kind == nets::CodecKind::Identity ? "identity" : "learned"},
                  {"factor", b.codec.factor},
                  {"latent_channels", b.codec.latent_channels},
                  {"image_channels", b.codec.image_channels}}},
                {"scale", b.scale},
                {"cond", b.cond},
                {"inference_steps", b.inference_steps}};
  if (b.anchor) model["anchor_net"] = net_json(b.anchor->config);
  meta.extra = std::move(model);
  Checkpoint ck{std::move(meta), {}};
  add_prefixed(ck.arrays, b.net.params, "net/");
  if (b.anchor) add_prefixed(ck.arrays, b.anchor->params, "anchor/");
  add_prefixed(ck.arrays, b.codec.params, "codec/");
  return ck;
}

ModelBundle unpack_bundle(const Checkpoint& ck) {
  ModelBundle b;
  try {
    const json& m = ck.meta.extra;
    b.stage = training::stage_from_string(ck.meta.stage);
    b.net = net_from_arrays(net_from(m.at("net")), take_prefixed(ck.arrays, "net/"), "net");
    if (m.contains("anchor_net")) {
      b.anchor = net_from_arrays(net_from(m.at("anchor_net")), take_prefixed(ck.arrays, "anchor/"), "anchor");
    }
    const json& c = m.at("codec");
    const int image_channels = c.at("image_channels").get<int>();
    if (c.at("kind").get<std::string>() == "identity") {
      b.codec = nets::identity_codec(image_channels);
    } else {
      b.codec = nets::init_learned_codec(0, image_channels, c.at("latent_channels").get<int>(), c.at("factor").get<int>());
      ParamSet stored = take_prefixed(ck.arrays, "codec/");
      if (!b.codec.params.same_layout(stored)) fail(ErrorCode::ShapeMismatch, "checkpoint codec arrays do not match");
      b.codec.params = std::move(stored);
    }
    b.scale = m.at("scale").get<int>();
    b.cond = m.at("cond").get<std::vector<double>>();
    b.inference_steps = m.at("inference_steps").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("checkpoint model description: ") + e.what());
  }
  if (b.stage == training::Stage::Stage2 && !b.anchor) {
    fail(ErrorCode::ParseError, "stage2 checkpoint lacks its stage1 anchor");
  }
  return b;
}

ImageTensor ModelBundle::infer(const ImageTensor& lr, double t) const {
  if (t_controllable()) {
    return diffusion::sr_at_t(diffusion::handle(net), diffusion::handle(*anchor), codec, lr, scale, diffusion::Timestep(t),
                              cond, inference_steps);
  }
  return diffusion::student_restore(diffusion::handle(net), codec, lr, scale, cond).x0;
}

}  // namespace tsr::harness
