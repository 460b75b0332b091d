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

// Feature cache container:
//
//   "GMTC" u32 version=1 u32 count
//   per record: u32 id_len, id bytes, u32 T, u32 true_len, u32 C, T*C f32 row-major
//
// All integers and floats little-endian.

#pragma once

#include <filesystem>
#include <vector>

#include "gmtc/binary_io.hpp"
#include "gmtc/mfcc.hpp"

namespace gmtc {

inline constexpr char kCacheMagic[4] = {'G', 'M', 'T', 'C'};
inline constexpr std::uint32_t kCacheVersion = 1;

inline std::string encode_cache(const std::vector<FeatureMatrix>& features) {
  ByteWriter w;
  w.bytes({kCacheMagic, 4});
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(features.size()));
  for (const auto& fm : features) {
    w.str(fm.clip_id);
    w.u32(static_cast<std::uint32_t>(fm.padded_len()));
    w.u32(static_cast<std::uint32_t>(fm.true_len));
    w.u32(static_cast<std::uint32_t>(fm.channels()));
    w.floats(fm.frames.values());
  }
  return w.buffer();
}

inline std::vector<FeatureMatrix> decode_cache(std::string bytes) {
  ByteReader r(std::move(bytes));
  if (r.bytes(4) != std::string_view(kCacheMagic, 4)) throw FormatError("feature cache: bad magic");
  const auto version = r.u32();
  if (version != kCacheVersion)
    throw FormatError("feature cache: unsupported version " + std::to_string(version));
  const auto count = r.u32();
  std::vector<FeatureMatrix> out;
  out.reserve(std::min<std::uint32_t>(count, 1u << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureMatrix fm;
    fm.clip_id = r.str();
    const auto t = r.u32(), true_len = r.u32(), c = r.u32();
    if (t == 0 || c == 0) throw FormatError("feature cache: empty record " + fm.clip_id);
    if (true_len > t) throw FormatError("feature cache: true_len exceeds T in " + fm.clip_id);
    if (static_cast<std::uint64_t>(t) * c * 4 > r.remaining())
      throw FormatError("feature cache: unexpected end of file (truncated)");
    fm.frames = Tensor<float>(Shape{t, c});
    fm.true_len = true_len;
    r.floats(fm.frames.values());
    out.push_back(std::move(fm));
  }
  if (!r.at_end()) throw FormatError("feature cache: trailing bytes");
  return out;
}

inline void cache_write(const std::filesystem::path& path, const std::vector<FeatureMatrix>& features) {
  ByteWriter w;
  w.bytes(encode_cache(features));
  w.save(path);
}

inline std::vector<FeatureMatrix> cache_read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open feature cache " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_cache(std::move(bytes));
}

}  // namespace gmtc
