// Copyright 2026 The maskscribe Authors.
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

#include "maskscribe/nn/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

namespace maskscribe::nn {
namespace {

constexpr const char* kMagic = "maskscribe-checkpoint";
constexpr int kVersion = 1;

using Kind = CheckpointError::Kind;

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
    throw CheckpointError(Kind::kCorruptManifest,
                          std::string("checkpoint ") + what + " must be a non-empty word: '" + s +
                              "'");
  }
}

void put_f32(std::string& out, float value) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

[[noreturn]] void corrupt(const std::string& what) {
  throw CheckpointError(Kind::kCorruptManifest, "corrupt checkpoint manifest: " + what);
}

}  // namespace

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) corrupt("missing meta key '" + key + "'");
  return it->second;
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ostringstream head;
  head << kMagic << ' ' << kVersion << '\n';
  head << "meta " << checkpoint.meta.size() << '\n';
  for (const auto& [key, value] : checkpoint.meta) {
    check_token(key, "meta key");
    check_token(value, "meta value");
    head << key << ' ' << value << '\n';
  }
  head << "params " << checkpoint.entries.size() << '\n';
  std::string payload;
  for (const auto& e : checkpoint.entries) {
    check_token(e.name, "parameter name");
    if (shape_size(e.shape) != e.data.size()) {
      throw CheckpointError(Kind::kShapeMismatch, "entry '" + e.name + "' data/shape mismatch");
    }
    head << e.name << ' ' << e.shape.size();
    for (std::size_t d : e.shape) head << ' ' << d;
    head << ' ' << payload.size() << '\n';
    for (float v : e.data) put_f32(payload, v);
  }
  head << "payload " << payload.size() << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot write checkpoint: " + path.string());
  const std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw CheckpointError(Kind::kIo, "write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot read checkpoint: " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  auto next_line = [&]() -> std::istringstream {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) corrupt("unexpected end of manifest");
    std::istringstream line(bytes.substr(pos, eol - pos));
    pos = eol + 1;
    return line;
  };
  auto expect_end = [](std::istringstream& line) {
    std::string extra;
    if (line >> extra) corrupt("trailing text '" + extra + "'");
  };

  Checkpoint ck;
  {
    auto line = next_line();
    std::string magic;
    int version = 0;
    if (!(line >> magic >> version) || magic != kMagic) corrupt("bad magic line");
    if (version != kVersion) corrupt("unsupported version " + std::to_string(version));
  }
  std::size_t meta_count = 0, param_count = 0, payload_size = 0;
  {
    auto line = next_line();
    std::string tag;
    if (!(line >> tag >> meta_count) || tag != "meta") corrupt("expected 'meta <n>'");
    expect_end(line);
  }
  for (std::size_t i = 0; i < meta_count; ++i) {
    auto line = next_line();
    std::string key, value;
    if (!(line >> key >> value)) corrupt("bad meta line");
    expect_end(line);
    ck.meta[key] = value;
  }
  struct Pending {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Pending> pending;
  {
    auto line = next_line();
    std::string tag;
    if (!(line >> tag >> param_count) || tag != "params") corrupt("expected 'params <n>'");
    expect_end(line);
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < param_count; ++i) {
    auto line = next_line();
    Pending p;
    std::size_t rank = 0;
    if (!(line >> p.name >> rank) || rank == 0) corrupt("bad parameter line");
    p.shape.resize(rank);
    for (auto& d : p.shape) {
      if (!(line >> d) || d == 0) corrupt("bad dimension for '" + p.name + "'");
    }
    if (!(line >> p.offset)) corrupt("missing offset for '" + p.name + "'");
    expect_end(line);
    if (!seen.insert(p.name).second) corrupt("duplicate parameter '" + p.name + "'");
    pending.push_back(std::move(p));
  }
  {
    auto line = next_line();
    std::string tag;
    if (!(line >> tag >> payload_size) || tag != "payload") corrupt("expected 'payload <bytes>'");
    expect_end(line);
  }
  std::size_t expected = 0;
  for (const auto& p : pending) {
    if (p.offset != expected) corrupt("non-contiguous offset for '" + p.name + "'");
    expected += 4 * shape_size(p.shape);
  }
  if (expected != payload_size) corrupt("payload size disagrees with parameter shapes");
  const std::size_t available = bytes.size() - pos;
  if (available < payload_size) {
    throw CheckpointError(Kind::kTruncatedPayload,
                          "checkpoint payload truncated: expected " +
                              std::to_string(payload_size) + " bytes, found " +
                              std::to_string(available));
  }
  if (available > payload_size) corrupt("trailing bytes after payload");
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& p : pending) {
    CheckpointEntry e{p.name, p.shape, std::vector<float>(shape_size(p.shape))};
    for (std::size_t i = 0; i < e.data.size(); ++i) e.data[i] = get_f32(base + p.offset + 4 * i);
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

template <typename S>
Checkpoint to_checkpoint(const ParamStore<S>& params, std::map<std::string, std::string> meta) {
  Checkpoint ck;
  ck.meta = std::move(meta);
  for (const auto& e : params.entries()) {
    CheckpointEntry out{e.name, e.tensor.shape(), {}};
    out.data.reserve(e.tensor.size());
    for (S v : e.tensor.data()) out.data.push_back(static_cast<float>(v));
    ck.entries.push_back(std::move(out));
  }
  return ck;
}

template <typename S>
void load_into(ParamStore<S>& params, const Checkpoint& checkpoint) {
  std::unordered_set<std::string> seen;
  for (const auto& e : checkpoint.entries) {
    if (!params.contains(e.name)) {
      throw CheckpointError(Kind::kUnknownParameter,
                            "checkpoint has unknown parameter '" + e.name + "'");
    }
    Tensor<S> t = params.get(e.name);
    if (t.shape() != e.shape) {
      throw CheckpointError(Kind::kShapeMismatch, "parameter '" + e.name + "' has shape " +
                                                      shape_string(e.shape) + ", model expects " +
                                                      shape_string(t.shape()));
    }
    seen.insert(e.name);
  }
  for (const auto& e : params.entries()) {
    if (!seen.count(e.name)) {
      throw CheckpointError(Kind::kMissingParameter,
                            "checkpoint lacks parameter '" + e.name + "'");
    }
  }
  for (const auto& e : checkpoint.entries) {
    auto dst = params.get(e.name).mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(e.data[i]);
  }
}

template Checkpoint to_checkpoint<float>(const ParamStore<float>&,
                                         std::map<std::string, std::string>);
template Checkpoint to_checkpoint<double>(const ParamStore<double>&,
                                          std::map<std::string, std::string>);
template void load_into<float>(ParamStore<float>&, const Checkpoint&);
template void load_into<double>(ParamStore<double>&, const Checkpoint&);

}  // namespace maskscribe::nn
