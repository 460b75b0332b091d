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

// 39-dimensional MFCC features: 13 cepstra plus first and second deltas.
//
// Pipeline per frame: Hamming window, zero-padded power spectrum, HTK-scale
// triangular mel filterbank, natural-log energies (floored), orthonormal
// DCT-II. Deltas use the standard regression formula over +/-2 frames with
// edge replication.

#pragma once

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gmtc/audio.hpp"
#include "gmtc/tensor.hpp"

namespace gmtc {

struct MfccOptions {
  int sample_rate = 22050;
  double frame_seconds = 0.05;
  double hop_seconds = 0.0125;
  int n_mels = 128;
  int n_ceps = 13;
  int delta_width = 2;
  double log_floor = 1e-10;

  std::size_t frame_length() const {
    return static_cast<std::size_t>(std::floor(frame_seconds * sample_rate));
  }
  std::size_t hop_length() const {
    return static_cast<std::size_t>(std::floor(hop_seconds * sample_rate));
  }
  std::size_t fft_size() const {
    std::size_t n = 1;
    while (n < frame_length()) n <<= 1;
    return n;
  }
  std::size_t n_features() const { return static_cast<std::size_t>(3 * n_ceps); }
};

/// A T x 39 feature map and the number of frames that carry signal.
struct FeatureMatrix {
  Tensor<float> frames;
  std::size_t true_len = 0;
  std::string clip_id;

  std::size_t padded_len() const { return frames.empty() ? 0 : frames.dim(0); }
  std::size_t channels() const { return frames.empty() ? 0 : frames.dim(1); }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

inline std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop) {
  if (n_samples < frame_len) return 0;
  return 1 + (n_samples - frame_len) / hop;
}

/// Splits a clip into overlapping frames without centering.
inline std::vector<std::vector<float>> frame_signal(const AudioClip& clip,
                                                    const MfccOptions& opt = {}) {
  const std::size_t flen = static_cast<std::size_t>(std::floor(opt.frame_seconds * clip.sample_rate));
  const std::size_t hop = static_cast<std::size_t>(std::floor(opt.hop_seconds * clip.sample_rate));
  if (flen == 0 || hop == 0) throw DataError("frame_signal: frame or hop rounds to zero samples");
  const std::size_t n = frame_count(clip.samples.size(), flen, hop);
  if (n == 0)
    throw DataError("frame_signal: clip of " + std::to_string(clip.samples.size()) +
                    " samples is shorter than one frame (" + std::to_string(flen) + ")");
  std::vector<std::vector<float>> frames(n);
  for (std::size_t i = 0; i < n; ++i)
    frames[i].assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(i * hop),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(i * hop + flen));
  return frames;
}

/// Symmetric Hamming window, w[0] = w[N-1] = 0.08.
inline std::vector<double> hamming_window(std::size_t n) {
  constexpr double kPi = 3.14159265358979323846;
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// n_mels x (n_fft/2 + 1) triangular filters, peak height 1, edges equally spaced in mel.
inline std::vector<std::vector<double>> mel_filterbank(int sample_rate, std::size_t n_fft, int n_mels,
                                                       double fmin = 0.0, double fmax = -1.0) {
  if (fmax < 0) fmax = sample_rate / 2.0;
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  std::vector<std::vector<double>> fb(static_cast<std::size_t>(n_mels), std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < fb.size(); ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      fb[m][k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

/// Orthonormal DCT-II, first n_out coefficients.
inline std::vector<double> dct2_ortho(const std::vector<double>& x, std::size_t n_out) {
  constexpr double kPi = 3.14159265358979323846;
  const std::size_t n = x.size();
  std::vector<double> y(n_out, 0.0);
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    y[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return y;
}

/// Regression deltas over +/-width frames, edges replicated. rows x cols, row-major.
inline std::vector<double> deltas(const std::vector<double>& x, std::size_t rows, std::size_t cols,
                                  int width = 2) {
  std::vector<double> d(rows * cols, 0.0);
  double denom = 0.0;
  for (int n = 1; n <= width; ++n) denom += 2.0 * n * n;
  const auto last = static_cast<long>(rows) - 1;
  for (std::size_t t = 0; t < rows; ++t) {
    for (int n = 1; n <= width; ++n) {
      const auto ahead = static_cast<std::size_t>(std::min(static_cast<long>(t) + n, last));
      const auto behind = static_cast<std::size_t>(std::max(static_cast<long>(t) - n, 0L));
      for (std::size_t c = 0; c < cols; ++c)
        d[t * cols + c] += n * (x[ahead * cols + c] - x[behind * cols + c]);
    }
    for (std::size_t c = 0; c < cols; ++c) d[t * cols + c] /= denom;
  }
  return d;
}

namespace detail {

// FFTW's planner is not thread-safe; execution with a private plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  /// |X_k|^2 for k = 0..n/2.
  void power(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

/// Reusable MFCC extractor. One instance per thread.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccOptions opt = {})
      : opt_(opt),
        window_(hamming_window(opt.frame_length())),
        filters_(mel_filterbank(opt.sample_rate, opt.fft_size(), opt.n_mels)),
        fft_(opt.fft_size()) {}

  const MfccOptions& options() const { return opt_; }

  /// 13 static cepstra per frame (rows x 13, row-major).
  std::vector<double> cepstra(const AudioClip& clip, std::size_t& n_frames) {
    if (clip.sample_rate != opt_.sample_rate)
      throw DataError("mfcc: clip rate " + std::to_string(clip.sample_rate) + " != " +
                      std::to_string(opt_.sample_rate) + "; resample first");
    const auto frames = frame_signal(clip, opt_);
    n_frames = frames.size();
    const std::size_t nfft = opt_.fft_size(), nc = static_cast<std::size_t>(opt_.n_ceps);
    std::vector<double> out(n_frames * nc);
    std::vector<double> power, logmel(filters_.size());
    for (std::size_t t = 0; t < n_frames; ++t) {
      double* in = fft_.input();
      const auto& fr = frames[t];
      for (std::size_t i = 0; i < nfft; ++i) in[i] = i < fr.size() ? fr[i] * window_[i] : 0.0;
      fft_.power(power);
      for (std::size_t m = 0; m < filters_.size(); ++m) {
        double e = 0.0;
        for (std::size_t k = 0; k < power.size(); ++k) e += filters_[m][k] * power[k];
        logmel[m] = std::log(std::max(e, opt_.log_floor));
      }
      const auto c = dct2_ortho(logmel, nc);
      std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(t * nc));
    }
    return out;
  }

  FeatureMatrix extract(const AudioClip& clip, std::string clip_id = {}) {
    std::size_t nt = 0;
    const auto c = cepstra(clip, nt);
    const std::size_t nc = static_cast<std::size_t>(opt_.n_ceps);
    const auto d1 = deltas(c, nt, nc, opt_.delta_width);
    const auto d2 = deltas(d1, nt, nc, opt_.delta_width);
    FeatureMatrix fm;
    fm.frames = Tensor<float>(Shape{nt, 3 * nc});
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t j = 0; j < nc; ++j) {
        fm.frames(t, j) = static_cast<float>(c[t * nc + j]);
        fm.frames(t, nc + j) = static_cast<float>(d1[t * nc + j]);
        fm.frames(t, 2 * nc + j) = static_cast<float>(d2[t * nc + j]);
      }
    fm.true_len = nt;
    fm.clip_id = std::move(clip_id);
    return fm;
  }

 private:
  MfccOptions opt_;
  std::vector<double> window_;
  std::vector<std::vector<double>> filters_;
  detail::RealFft fft_;
};

inline FeatureMatrix mfcc_39(const AudioClip& clip, std::string clip_id = {}) {
  MfccExtractor ex;
  return ex.extract(clip, std::move(clip_id));
}

/// Zero rows appended after true_len up to t_max frames. Longer maps are
/// truncated from the end and `truncated` (if given) is incremented.
inline FeatureMatrix pad_to(const FeatureMatrix& fm, std::size_t t_max, std::size_t* truncated = nullptr) {
  if (t_max == 0) throw std::invalid_argument("pad_to: t_max must be positive");
  const std::size_t nc = fm.channels();
  FeatureMatrix out;
  out.clip_id = fm.clip_id;
  out.frames = Tensor<float>(Shape{t_max, nc});
  std::size_t keep = std::min(fm.true_len, t_max);
  if (fm.true_len > t_max && truncated) ++*truncated;
  std::copy_n(fm.frames.data(), keep * nc, out.frames.data());
  out.true_len = keep;
  return out;
}

/// Drops padding rows.
inline FeatureMatrix unpad(const FeatureMatrix& fm) {
  FeatureMatrix out;
  out.clip_id = fm.clip_id;
  out.true_len = fm.true_len;
  const std::size_t nc = fm.channels();
  out.frames = Tensor<float>(Shape{fm.true_len, nc},
                             std::vector<float>(fm.frames.data(), fm.frames.data() + fm.true_len * nc));
  return out;
}

/// Per-utterance zero-mean, unit-variance columns over the true frames.
inline void normalize_utterance(FeatureMatrix& fm) {
  const std::size_t nc = fm.channels(), nt = fm.true_len;
  if (nt == 0) return;
  for (std::size_t c = 0; c < nc; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < nt; ++t) mean += fm.frames(t, c);
    mean /= static_cast<double>(nt);
    for (std::size_t t = 0; t < nt; ++t) sq += (fm.frames(t, c) - mean) * (fm.frames(t, c) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(nt));
    for (std::size_t t = 0; t < nt; ++t)
      fm.frames(t, c) = static_cast<float>(sd > 1e-8 ? (fm.frames(t, c) - mean) / sd : 0.0);
  }
}

/// Max length rounded up to a multiple of `multiple`.
inline std::size_t corpus_t_max(const std::vector<FeatureMatrix>& fms, std::size_t multiple = 32) {
  std::size_t m = 1;
  for (const auto& f : fms) m = std::max(m, f.true_len);
  return (m + multiple - 1) / multiple * multiple;
}

}  // namespace gmtc
