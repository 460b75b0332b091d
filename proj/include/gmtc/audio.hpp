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

// WAV I/O and band-limited resampling.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmtc {

/// Malformed or unsupported input data (bad files, bad manifests).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AudioClip {
  std::vector<float> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Decodes a RIFF/WAVE buffer: PCM 16-bit or IEEE float 32-bit; channels averaged to mono.
inline AudioClip decode_wav(const std::vector<unsigned char>& buf) {
  using detail::read_u16le;
  using detail::read_u32le;
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t len = read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, buf.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError("truncated fmt chunk");
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = read_u16le(chunk + 32);  // extensible
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = chunk + 8;
      pcm_bytes = avail;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || rate == 0) throw DataError("missing or invalid fmt chunk");
  if (pcm == nullptr) throw DataError("missing data chunk");

  const bool is_pcm16 = format == 1 && bits == 16;
  const bool is_f32 = format == 3 && bits == 32;
  if (!is_pcm16 && !is_f32)
    throw DataError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = pcm_bytes / (bytes_per_sample * channels);
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = pcm + (f * channels + c) * bytes_per_sample;
      if (is_pcm16) {
        acc += static_cast<std::int16_t>(read_u16le(p)) / 32768.0;
      } else {
        float v;
        const std::uint32_t u = read_u32le(p);
        std::memcpy(&v, &u, 4);
        acc += v;
      }
    }
    clip.samples[f] = static_cast<float>(acc / channels);
  }
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(buf);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Writes mono 16-bit PCM; samples are clipped to [-1, 1].
inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  using detail::put_u16le;
  using detail::put_u32le;
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32le(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);
  put_u16le(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out += "data";
  put_u32le(out, 2 * n);
  for (float s : clip.samples) {
    const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const long q = std::clamp(std::lround(c * 32768.0), -32768L, 32767L);
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

/// Windowed-sinc interpolation to target_rate.
///
/// The low-pass cutoff sits at the lower of the two Nyquist frequencies. Each
/// output sample normalizes by the sum of the taps it actually used, so a
/// constant input stays constant all the way to the clip edges.
inline AudioClip resample(const AudioClip& clip, int target_rate = 22050, int zero_crossings = 16) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (clip.samples.empty()) throw DataError("resample: empty clip");
  if (clip.sample_rate <= 0) throw DataError("resample: invalid source rate");
  if (clip.sample_rate == target_rate) return clip;

  constexpr double kPi = 3.14159265358979323846;
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;  // input samples per output
  const double cutoff = std::min(1.0, 1.0 / ratio);
  const double half_width = zero_crossings / cutoff;
  const auto n_in = static_cast<long>(clip.samples.size());
  const auto n_out = static_cast<std::size_t>(
      std::max(1L, std::lround(static_cast<double>(n_in) / ratio)));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0, wsum = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double x = t - static_cast<double>(k);
      const double arg = cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(kPi * arg) / (kPi * arg);
      const double win = 0.5 + 0.5 * std::cos(kPi * x / half_width);  // Hann
      const double w = sinc * win;
      acc += w * clip.samples[static_cast<std::size_t>(k)];
      wsum += w;
    }
    out.samples[n] = static_cast<float>(wsum != 0.0 ? acc / wsum : 0.0);
  }
  return out;
}

}  // namespace gmtc
