// Copyright 2026 The gmtc Authors
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

// Checkpoint container (little-endian):
//
//   "GMCK" u32 version=1
//   u32 len + canonical model config text
//   u32 tensor count
//   per tensor: u32 len + name, u32 rank, rank x u32 extents, f32 data
//   u32 len + training metadata text (key=value)

#pragma once

#include <filesystem>

#include "gmtc/binary_io.hpp"
#include "gmtc/model.hpp"

namespace gmtc {

inline constexpr char kCheckpointMagic[4] = {'G', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParamStore<float> params;
  KeyValues meta;
};

inline std::string encode_checkpoint(const ModelConfig& cfg, const ParamStore<float>& params,
                                     const KeyValues& meta = {}) {
  ByteWriter w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.str(cfg.canonical_text());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    w.str(params.name(i));
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    w.floats(t.values());
  }
  w.str(meta.canonical());
  return w.buffer();
}

inline Checkpoint decode_checkpoint(std::string bytes) {
  ByteReader r(std::move(bytes));
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config = ModelConfig::from_kv(KeyValues::parse(r.str()));
  ck.params = ParamStore<float>(ck.config);
  const auto count = r.u32();
  if (count != ck.params.size())
    throw ShapeError("checkpoint: " + std::to_string(count) + " tensors, config requires " +
                     std::to_string(ck.params.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str();
    if (name != ck.params.name(i))
      throw ShapeError("checkpoint: tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                       ck.params.name(i) + "'");
    const auto rank = r.u32();
    if (rank == 0 || rank > Shape::kMaxRank) throw FormatError("checkpoint: bad rank for " + name);
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    auto& t = ck.params[i];
    if (!(Shape(std::span<const std::size_t>(dims)) == t.shape()))
      throw ShapeError("checkpoint: shape of " + name + " does not match config (" +
                       Shape(std::span<const std::size_t>(dims)).str() + " vs " + t.shape().str() + ")");
    r.floats(t.values());
  }
  ck.meta = KeyValues::parse(r.str());
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

inline void checkpoint_save(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ParamStore<float>& params, const KeyValues& meta = {}) {
  ByteWriter w;
  w.bytes(encode_checkpoint(cfg, params, meta));
  w.save(path);
}

inline Checkpoint checkpoint_load(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  return decode_checkpoint(r.bytes(r.remaining()));
}

/// Loads and additionally requires the stored config to equal `expected`.
inline Checkpoint checkpoint_load(const std::filesystem::path& path, const ModelConfig& expected) {
  auto ck = checkpoint_load(path);
  if (!(ck.config == expected))
    throw ShapeError("checkpoint: stored config differs from expected:\n" + ck.config.canonical_text() +
                     "vs\n" + expected.canonical_text());
  return ck;
}

}  // namespace gmtc
