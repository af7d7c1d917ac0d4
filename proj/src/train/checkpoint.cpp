// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "otr/config.hpp"
#include "otr/error.hpp"

namespace otr::train {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void bytes(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void tensor(const std::string& name, const nk::Shape& shape, std::span<const float> data) {
    bytes(name);
    u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) u32(static_cast<std::uint32_t>(d));
    for (float v : data) u32(std::bit_cast<std::uint32_t>(v));
  }
  void raw(const char* s, std::size_t n) { buf_.insert(buf_.end(), s, s + n); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes() {
    const std::size_t n = u32();
    need(n, "string");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(std::size_t offset, const std::string& msg) const { throw FormatError(path_, offset, msg); }

 private:
  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) fail(pos_, std::string("truncated ") + what);
  }
  std::vector<char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  nk::Shape shape;
  std::vector<float> data;
};

void take(std::map<std::string, StoredTensor>& stored, const std::string& name, std::span<float> dst,
          const nk::Shape& shape, const Reader& r) {
  auto it = stored.find(name);
  if (it == stored.end()) r.fail(0, "missing tensor " + name);
  if (it->second.shape != shape) {
    r.fail(0, "tensor " + name + " has shape " + nk::shape_str(it->second.shape) + ", expected " + nk::shape_str(shape));
  }
  std::copy(it->second.data.begin(), it->second.data.end(), dst.begin());
  stored.erase(it);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& config) {
  const auto named = state.params.named();
  Writer w;
  w.raw("OTRC", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(3 * named.size()));
  for (const auto& nt : named) w.tensor(nt.name, nt.tensor.shape(), nt.tensor.data());
  for (std::size_t i = 0; i < named.size(); ++i) w.tensor("adam.m." + named[i].name, named[i].tensor.shape(), state.adam.m[i]);
  for (std::size_t i = 0; i < named.size(); ++i) w.tensor("adam.v." + named[i].name, named[i].tensor.shape(), state.adam.v[i]);
  config::Json meta;
  meta["train"] = config::to_json(config);
  meta["epoch"] = state.epoch;
  meta["adam_step"] = state.adam.step;
  w.bytes(meta.dump());
  std::ostringstream rng;
  rng << state.rng;
  w.bytes(rng.str());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string(), 0, "cannot open checkpoint");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()), path.string());
  if (r.u32() != 0x4352544Fu) r.fail(0, "bad magic (expected OTRC)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail(4, "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, StoredTensor> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    std::string name = r.bytes();
    StoredTensor t;
    const std::uint32_t rank = r.u32();
    if (rank > 8) r.fail(at, "tensor " + name + " has implausible rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.u32());
    const std::size_t n = nk::numel(t.shape);
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t off = r.pos();
      t.data[k] = r.f32();
      if (!std::isfinite(t.data[k])) r.fail(off, "non-finite value in tensor " + name);
    }
    if (!stored.emplace(std::move(name), std::move(t)).second) r.fail(at, "duplicate tensor name");
  }

  const std::size_t meta_at = r.pos();
  Checkpoint ck;
  config::Json meta;
  try {
    meta = config::Json::parse(r.bytes());
    ck.config = config::train_from_json(meta.at("train"), "checkpoint.train");
    ck.state.epoch = meta.at("epoch").get<std::size_t>();
    ck.state.adam.step = meta.at("adam_step").get<std::uint64_t>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(meta_at, std::string("bad metadata: ") + e.what());
  }
  const std::size_t rng_at = r.pos();
  std::istringstream rng(r.bytes());
  rng >> ck.state.rng;
  if (!rng) r.fail(rng_at, "bad rng state");
  if (!r.at_end()) r.fail(r.pos(), "trailing bytes");

  ck.state.params = ssm::init_model(ck.config.model, 0);
  const auto named = ck.state.params.named();
  const std::uint64_t step = ck.state.adam.step;
  ck.state.adam = init_adam(named);
  ck.state.adam.step = step;
  for (std::size_t i = 0; i < named.size(); ++i) {
    nk::Tensor t = named[i].tensor;
    take(stored, named[i].name, t.mutable_data(), t.shape(), r);
    take(stored, "adam.m." + named[i].name, ck.state.adam.m[i], t.shape(), r);
    take(stored, "adam.v." + named[i].name, ck.state.adam.v[i], t.shape(), r);
  }
  if (!stored.empty()) r.fail(0, "unexpected tensor " + stored.begin()->first);
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ssm::ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.config.model == expected)) {
    throw ConfigError("checkpoint " + path.string() + " holds model " + config::to_json(ck.config.model).dump() +
                      ", expected " + config::to_json(expected).dump());
  }
  return ck;
}

}  // namespace otr::train
