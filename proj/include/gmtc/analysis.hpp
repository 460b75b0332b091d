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

// Interpretability tools: per-layer feature maps, 2-D image entropy, and an
// autoencoder that projects pooled high-level features onto a plane.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "gmtc/adam.hpp"
#include "gmtc/model.hpp"

namespace gmtc {

/// 8-bit grayscale image, row-major (height rows of width pixels).
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  GrayImage transposed() const {
    GrayImage t{height, width, std::vector<std::uint8_t>(pixels.size())};
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) t.pixels[x * height + y] = at(x, y);
    return t;
  }
};

struct FeatureMap {
  std::string source;  // input | gcb<i> | gtcm_output
  Tensor<float> values;  // T x C
  GrayImage image;       // width T (time), height C
};

/// Per-map min-max scaling to [0, 255]; a constant map becomes all zeros.
/// Pixel (x = t, y = c) holds values(t, c).
inline GrayImage normalize_u8(const Tensor<float>& map) {
  if (map.rank() != 2) throw ShapeError("normalize_u8: expected a T x C map");
  const std::size_t nt = map.dim(0), nc = map.dim(1);
  GrayImage img{nt, nc, std::vector<std::uint8_t>(nt * nc, 0)};
  const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return img;
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t c = 0; c < nc; ++c) {
      const double v = 255.0 * (static_cast<double>(map(t, c)) - lo) / (hi - lo);
      img.pixels[c * nt + t] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  return img;
}

/// Shannon entropy (bits) of the joint distribution of (pixel value, rounded
/// mean of its in-bounds 3x3 neighbours).
inline double entropy_2d(const GrayImage& img) {
  if (img.width < 2 || img.height < 2) throw std::invalid_argument("entropy_2d: image must be at least 2x2");
  if (img.pixels.size() != img.width * img.height) throw ShapeError("entropy_2d: pixel count mismatch");
  std::unordered_map<std::uint32_t, std::size_t> freq;
  const auto w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      long sum = 0, cells = 0;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          sum += img.pixels[static_cast<std::size_t>(yy * w + xx)];
          ++cells;
        }
      const long center = img.pixels[static_cast<std::size_t>(y * w + x)];
      const double mean = static_cast<double>(sum - center) / static_cast<double>(cells - 1);
      const auto n = static_cast<std::uint32_t>(std::lround(mean));
      ++freq[static_cast<std::uint32_t>(center) * 256u + n];
    }
  const double total = static_cast<double>(img.width * img.height);
  double e = 0.0;
  for (const auto& [key, count] : freq) {
    const double p = static_cast<double>(count) / total;
    e -= p * std::log2(p);
  }
  return e;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline std::string map_csv(const Tensor<float>& map) {
  std::ostringstream os;
  os.precision(9);
  for (std::size_t t = 0; t < map.dim(0); ++t) {
    for (std::size_t c = 0; c < map.dim(1); ++c) os << (c ? "," : "") << map(t, c);
    os << '\n';
  }
  return os.str();
}

namespace detail {

inline Tensor<float> first_frames(const Tensor<float>& batch_map, std::size_t b, std::size_t frames) {
  const std::size_t nt = batch_map.dim(1), nc = batch_map.dim(2);
  frames = std::clamp<std::size_t>(frames, 1, nt);
  const float* src = batch_map.data() + b * nt * nc;
  return Tensor<float>(Shape{frames, nc}, std::vector<float>(src, src + frames * nc));
}

}  // namespace detail

/// Input, every block output F_i, and the GTCM output LeakyReLU(S), each cut
/// to the utterance's true length: n_gcb + 2 maps in that order.
inline std::vector<FeatureMap> export_feature_maps(const ModelConfig& cfg, const ParamStore<float>& params,
                                                   const FeatureMatrix& fm) {
  const std::size_t len = fm.true_len;
  const auto fp = forward_pass(fm.frames, cfg, params, std::span<const std::size_t>(&len, 1));
  std::vector<FeatureMap> maps;
  auto push = [&](std::string source, Tensor<float> v) {
    GrayImage img = normalize_u8(v);
    maps.push_back({std::move(source), std::move(v), std::move(img)});
  };
  push("input", detail::first_frames(fp.input, 0, len));
  for (std::size_t i = 0; i < cfg.n_gcb; ++i)
    push("gcb" + std::to_string(i + 1), detail::first_frames(fp.block_output(i), 0, len));
  push("gtcm_output", detail::first_frames(fp.gtcm_out, 0, len));
  return maps;
}

/// GAP-pooled GTCM output for one utterance (length = channels).
inline std::vector<float> pooled_features(const ModelConfig& cfg, const ParamStore<float>& params,
                                          const FeatureMatrix& fm) {
  const std::size_t len = fm.true_len;
  const auto fp = forward_pass(fm.frames, cfg, params, std::span<const std::size_t>(&len, 1));
  return {fp.pooled.data(), fp.pooled.data() + fp.pooled.size()};
}

// ---- autoencoder ---------------------------------------------------------------

struct AeOptions {
  std::uint64_t seed = 0;
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  AdamHyper adam{};
  std::size_t input_width = 39;
};

/// Dense autoencoder: input -> 64 -> 16 -> 8 -> 2 -> 8 -> 16 -> 128 -> input.
/// ReLU on hidden layers, linear bottleneck and output. Inputs are z-scored
/// with statistics fitted on the training set.
struct AeModel {
  static constexpr std::size_t kEncoderLayers = 4;
  std::vector<Tensor<float>> weights;  // out x in
  std::vector<Tensor<float>> biases;
  std::vector<float> mean, scale;
  std::vector<double> loss_history;

  std::size_t input_width() const { return weights.empty() ? 0 : weights.front().dim(1); }
  std::size_t bottleneck() const { return weights[kEncoderLayers - 1].dim(0); }
  std::size_t layers() const { return weights.size(); }
};

inline std::vector<std::size_t> ae_widths(std::size_t d) { return {d, 64, 16, 8, 2, 8, 16, 128, d}; }

namespace detail {

inline bool ae_relu_after(std::size_t layer, std::size_t n_layers) {
  return layer + 1 != AeModel::kEncoderLayers && layer + 1 != n_layers;
}

inline Tensor<float> ae_standardize(const AeModel& m, const Tensor<float>& x) {
  Tensor<float> z = x;
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) z(i, j) = (x(i, j) - m.mean[j]) / m.scale[j];
  return z;
}

// Activations after each layer; acts[0] is the input.
inline std::vector<Tensor<float>> ae_run(const AeModel& m, const Tensor<float>& z, std::size_t upto) {
  std::vector<Tensor<float>> acts{z};
  for (std::size_t l = 0; l < upto; ++l) {
    Tensor<float> y = dense(acts.back(), m.weights[l], m.biases[l]);
    if (ae_relu_after(l, m.layers())) y = relu(std::move(y));
    acts.push_back(std::move(y));
  }
  return acts;
}

inline double ae_mse(const Tensor<float>& recon, const Tensor<float>& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) s += (recon[i] - target[i]) * (recon[i] - target[i]);
  return s / static_cast<double>(recon.size());
}

}  // namespace detail

inline void check_ae_input(const Tensor<float>& x, std::size_t width) {
  if (x.rank() != 2 || x.dim(1) != width)
    throw ShapeError("autoencoder: expected N x " + std::to_string(width) + " features, got " + x.shape().str());
}

/// Reconstruction MSE in standardized space.
inline double ae_reconstruction_mse(const AeModel& m, const Tensor<float>& x) {
  check_ae_input(x, m.input_width());
  const auto z = detail::ae_standardize(m, x);
  return detail::ae_mse(detail::ae_run(m, z, m.layers()).back(), z);
}

inline AeModel ae_init(const Tensor<float>& x, const AeOptions& opt = {}) {
  check_ae_input(x, opt.input_width);
  AeModel m;
  const auto widths = ae_widths(opt.input_width);
  Rng rng(opt.seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Tensor<float> w(Shape{widths[l + 1], widths[l]});
    xavier_uniform(w, widths[l], widths[l + 1], rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(Shape{widths[l + 1]});
  }
  const std::size_t n = x.dim(0), d = x.dim(1);
  m.mean.assign(d, 0.0f);
  m.scale.assign(d, 1.0f);
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += x(i, j);
    mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (x(i, j) - mu) * (x(i, j) - mu);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    m.mean[j] = static_cast<float>(mu);
    m.scale[j] = static_cast<float>(sd > 1e-6 ? sd : 1.0);
  }
  return m;
}

/// Mean-squared-error training with Adam; deterministic per seed.
inline AeModel ae_train(const Tensor<float>& x, const AeOptions& opt = {}) {
  check_ae_input(x, opt.input_width);
  if (x.dim(0) < 10) throw std::invalid_argument("ae_train: need at least 10 samples");
  AeModel m = ae_init(x, opt);
  const auto z = detail::ae_standardize(m, x);
  const std::size_t n = z.dim(0), d = z.dim(1);
  AdamState<float> adam;
  adam.hyper = opt.adam;
  Rng rng(opt.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Tensor<float>> params;
  for (std::size_t l = 0; l < m.layers(); ++l) {
    params.push_back(m.weights[l]);
    params.push_back(m.biases[l]);
  }
  auto sync = [&] {
    for (std::size_t l = 0; l < m.layers(); ++l) {
      m.weights[l] = params[2 * l];
      m.biases[l] = params[2 * l + 1];
    }
  };

  m.loss_history.push_back(detail::ae_mse(detail::ae_run(m, z, m.layers()).back(), z));
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t nb = std::min(opt.batch_size, n - start);
      Tensor<float> xb(Shape{nb, d});
      for (std::size_t b = 0; b < nb; ++b)
        std::copy_n(z.data() + order[start + b] * d, d, xb.data() + b * d);
      const auto acts = detail::ae_run(m, xb, m.layers());
      Tensor<float> g = acts.back();
      const float k = 2.0f / static_cast<float>(nb * d);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = k * (g[i] - xb[i]);
      std::vector<Tensor<float>> grads(params.size());
      for (std::size_t l = m.layers(); l-- > 0;) {
        if (detail::ae_relu_after(l, m.layers())) g = relu_backward(acts[l + 1], std::move(g));
        auto dg = dense_backward(acts[l], m.weights[l], g);
        grads[2 * l] = std::move(dg.weight);
        grads[2 * l + 1] = std::move(dg.bias);
        g = std::move(dg.input);
      }
      adam_step(std::span<Tensor<float>>(params), std::span<const Tensor<float>>(grads), adam);
      sync();
    }
    m.loss_history.push_back(detail::ae_mse(detail::ae_run(m, z, m.layers()).back(), z));
  }
  return m;
}

/// Bottleneck coordinates, N x 2.
inline Tensor<float> ae_project(const AeModel& m, const Tensor<float>& x) {
  check_ae_input(x, m.input_width());
  const auto z = detail::ae_standardize(m, x);
  return detail::ae_run(m, z, AeModel::kEncoderLayers).back();
}

}  // namespace gmtc
