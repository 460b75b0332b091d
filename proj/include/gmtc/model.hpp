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

// Gated multi-scale temporal convolutional network.
//
//   x0   = causal 1x1 conv of the input features
//   G_1  = x0, G_{i+1} = H_i
//   GCB i: each gating level averages J gated sub-blocks
//            out = ReLU(conv_v(u)) * sigmoid(ReLU(conv_g(u)))
//          levels chain, F_i is the last level's average, H_i = F_i + G_i
//   S    = sum_i F_i (multi-scale) or F_n (max-scale)
//   logits = dense(avgpool_t(LeakyReLU(S)))

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gmtc/config_text.hpp"
#include "gmtc/mfcc.hpp"
#include "gmtc/ops.hpp"
#include "gmtc/tensor.hpp"

namespace gmtc {

enum class DrdScheme { ours, raw };
enum class SkipMode { multi_scale, max_scale };

inline std::string to_string(DrdScheme d) { return d == DrdScheme::ours ? "ours" : "raw"; }
inline std::string to_string(SkipMode s) { return s == SkipMode::multi_scale ? "multi_scale" : "max_scale"; }

struct ModelConfig {
  std::size_t channels = 39;
  std::size_t kernel_size = 2;
  std::size_t n_gcb = 7;
  std::size_t gating_levels = 2;
  std::size_t n_gscb = 3;
  DrdScheme drd_scheme = DrdScheme::ours;
  SkipMode skip_mode = SkipMode::multi_scale;
  double leaky_alpha = 0.05;
  std::size_t n_classes = 6;
  std::size_t seq_len = 256;
  bool masked_gap = false;

  void validate() const {
    if (channels == 0 || kernel_size == 0) throw std::invalid_argument("model config: channels and kernel_size must be positive");
    if (n_gcb < 1) throw std::invalid_argument("model config: n_gcb must be >= 1");
    if (gating_levels < 1) throw std::invalid_argument("model config: gating_levels must be >= 1");
    if (n_gscb < 1) throw std::invalid_argument("model config: n_gscb must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("model config: n_classes must be >= 2");
    if (seq_len < 1) throw std::invalid_argument("model config: seq_len must be >= 1");
    if (n_gcb > 24) throw std::invalid_argument("model config: n_gcb too large");
  }

  /// Largest dilation any level may use: the second-level rate of the last block.
  std::size_t max_dilation_cap() const {
    return std::size_t{1} << (n_gcb - 1 + (gating_levels >= 2 ? 1 : 0));
  }

  /// Dilation of gating level `level` (1-based) inside block `block` (1-based).
  std::size_t dilation(std::size_t block, std::size_t level) const {
    const std::size_t base = std::size_t{1} << (block - 1);
    if (drd_scheme == DrdScheme::raw) return base;
    return std::min(base << std::min<std::size_t>(level - 1, 40), max_dilation_cap());
  }

  KeyValues to_kv() const {
    KeyValues kv;
    kv.set("channels", channels);
    kv.set("kernel_size", kernel_size);
    kv.set("n_gcb", n_gcb);
    kv.set("gating_levels", gating_levels);
    kv.set("n_gscb", n_gscb);
    kv.set("drd_scheme", to_string(drd_scheme));
    kv.set("skip_mode", to_string(skip_mode));
    kv.set("leaky_alpha", leaky_alpha);
    kv.set("n_classes", n_classes);
    kv.set("seq_len", seq_len);
    kv.set("masked_gap", masked_gap);
    return kv;
  }

  std::string canonical_text() const { return to_kv().canonical(); }

  /// Reads model keys from kv; keys it does not know are ignored.
  static ModelConfig from_kv(const KeyValues& kv) { return from_kv(kv, ModelConfig()); }
  static ModelConfig from_kv(const KeyValues& kv, ModelConfig c) {
    c.channels = kv.get("channels", c.channels);
    c.kernel_size = kv.get("kernel_size", c.kernel_size);
    c.n_gcb = kv.get("n_gcb", c.n_gcb);
    c.gating_levels = kv.get("gating_levels", c.gating_levels);
    c.n_gscb = kv.get("n_gscb", c.n_gscb);
    const auto drd = kv.get("drd_scheme", to_string(c.drd_scheme));
    if (drd == "ours") c.drd_scheme = DrdScheme::ours;
    else if (drd == "raw") c.drd_scheme = DrdScheme::raw;
    else throw DataError("config: drd_scheme must be ours|raw, got " + drd);
    const auto skip = kv.get("skip_mode", to_string(c.skip_mode));
    if (skip == "multi_scale") c.skip_mode = SkipMode::multi_scale;
    else if (skip == "max_scale") c.skip_mode = SkipMode::max_scale;
    else throw DataError("config: skip_mode must be multi_scale|max_scale, got " + skip);
    c.leaky_alpha = kv.get("leaky_alpha", c.leaky_alpha);
    c.n_classes = kv.get("n_classes", c.n_classes);
    c.seq_len = kv.get("seq_len", c.seq_len);
    c.masked_gap = kv.get("masked_gap", c.masked_gap);
    c.validate();
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Closed-form number of trainable scalars.
inline std::size_t param_count(const ModelConfig& cfg) {
  const std::size_t c = cfg.channels, k = cfg.kernel_size;
  const std::size_t entry = c * c * 1 + c;
  const std::size_t conv = c * c * k + c;
  const std::size_t gscbs = cfg.n_gcb * cfg.gating_levels * cfg.n_gscb * 2 * conv;
  const std::size_t head = c * cfg.n_classes + cfg.n_classes;
  return entry + gscbs + head;
}

struct ReceptiveField {
  std::size_t nominal;  // kernel_size * largest dilation
  std::size_t actual;   // 1 + (k - 1) * sum of dilations along the deepest path
};

inline ReceptiveField receptive_field(const ModelConfig& cfg) {
  std::size_t dmax = 1, dsum = 0;
  for (std::size_t i = 1; i <= cfg.n_gcb; ++i)
    for (std::size_t l = 1; l <= cfg.gating_levels; ++l) {
      const auto d = cfg.dilation(i, l);
      dmax = std::max(dmax, d);
      dsum += d;
    }
  return {cfg.kernel_size * dmax, 1 + (cfg.kernel_size - 1) * dsum};
}

/// Named trainable tensors in a fixed order:
/// entry.{kernel,bias}, gcb{i}.level{l}.gscb{j}.{value,gate}.{kernel,bias}, head.{weight,bias}.
template <typename S>
class ParamStore {
 public:
  ParamStore() = default;

  /// Zero-filled store shaped for cfg.
  explicit ParamStore(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels, k = cfg.kernel_size;
    add("entry.kernel", Shape{c, c, 1});
    add("entry.bias", Shape{c});
    for (std::size_t i = 1; i <= cfg.n_gcb; ++i)
      for (std::size_t l = 1; l <= cfg.gating_levels; ++l)
        for (std::size_t j = 1; j <= cfg.n_gscb; ++j) {
          const std::string p = "gcb" + std::to_string(i) + ".level" + std::to_string(l) + ".gscb" +
                                std::to_string(j) + ".";
          add(p + "value.kernel", Shape{c, c, k});
          add(p + "value.bias", Shape{c});
          add(p + "gate.kernel", Shape{c, c, k});
          add(p + "gate.bias", Shape{c});
        }
    add("head.weight", Shape{cfg.n_classes, c});
    add("head.bias", Shape{cfg.n_classes});
  }

  /// Xavier-uniform kernels and dense weights, zero biases.
  static ParamStore xavier(const ModelConfig& cfg, std::uint64_t seed) {
    ParamStore p(cfg);
    Rng rng(seed);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto& t = p.tensors_[i];
      if (t.rank() == 3) xavier_uniform(t, t.dim(1) * t.dim(2), t.dim(0) * t.dim(2), rng);
      else if (t.rank() == 2) xavier_uniform(t, t.dim(1), t.dim(0), rng);
    }
    return p;
  }

  const ModelConfig& config() const { return cfg_; }
  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  Tensor<S>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<S>& operator[](std::size_t i) const { return tensors_[i]; }
  std::vector<Tensor<S>>& tensors() { return tensors_; }
  const std::vector<Tensor<S>>& tensors() const { return tensors_; }

  Tensor<S>& at(const std::string& n) { return tensors_[index_of(n)]; }
  const Tensor<S>& at(const std::string& n) const { return tensors_[index_of(n)]; }
  std::size_t index_of(const std::string& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + n);
    return it->second;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  // Positional accessors; block, level, sub are 0-based.
  static constexpr std::size_t kEntryKernel = 0, kEntryBias = 1;
  std::size_t gscb_base(std::size_t block, std::size_t level, std::size_t sub) const {
    return 2 + ((block * cfg_.gating_levels + level) * cfg_.n_gscb + sub) * 4;
  }
  std::size_t head_weight() const { return tensors_.size() - 2; }
  std::size_t head_bias() const { return tensors_.size() - 1; }

  void zero() {
    for (auto& t : tensors_) t.fill(S(0));
  }

  template <typename D>
  ParamStore<D> cast() const {
    ParamStore<D> out(cfg_);
    for (std::size_t i = 0; i < size(); ++i) out[i] = tensors_[i].template cast<D>();
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.cfg_ == b.cfg_ && a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  void add(std::string n, Shape s) {
    index_.emplace(n, tensors_.size());
    names_.push_back(std::move(n));
    tensors_.emplace_back(s);
  }

  ModelConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Tensor<S>> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// One gated sub-block: ReLU(conv_value(u)) * sigmoid(ReLU(conv_gate(u))).
template <typename S>
Tensor<S> gscb_forward(const Tensor<S>& u, const ConvParams<S>& value, const ConvParams<S>& gate) {
  if (value.dilation != gate.dilation) throw std::invalid_argument("gscb_forward: branch dilations differ");
  Tensor<S> a = conv1d_causal(u, value);
  const Tensor<S> g = conv1d_causal(u, gate);
  if (!(a.shape() == g.shape())) throw ShapeError("gscb_forward: branch outputs differ in shape");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const S r = a[i] > S(0) ? a[i] : S(0);
    const S q = g[i] > S(0) ? g[i] : S(0);
    a[i] = r * sigmoid_scalar(q);
  }
  return a;
}

/// Intermediate values of a forward pass; enough to run backward.
template <typename S>
struct ForwardPass {
  Tensor<S> input;                 // B x T x C
  std::vector<std::size_t> lengths;
  Tensor<S> entry_out;             // x0
  std::vector<Tensor<S>> block_in;      // G_i
  std::vector<std::vector<Tensor<S>>> level_out;  // [block][level] averaged output; last = F_i
  // [block][level][sub] pre-activations of the value and gate convolutions
  std::vector<std::vector<std::vector<Tensor<S>>>> value_pre, gate_pre;
  Tensor<S> skip_sum;              // S
  Tensor<S> gtcm_out;              // LeakyReLU(S)
  Tensor<S> pooled;                // B x C
  Tensor<S> logits;                // B x K
  bool cached = false;

  const Tensor<S>& block_output(std::size_t block) const { return level_out[block].back(); }
};

namespace detail {

template <typename S>
Tensor<S> as_batch(Tensor<S> x) {
  if (x.rank() == 2) return x.reshaped(Shape{1, x.dim(0), x.dim(1)});
  if (x.rank() == 3) return x;
  throw ShapeError("model input must be T x C or B x T x C");
}

}  // namespace detail

/// Runs the network on a batch (B x T x C) or single sequence (T x C).
/// `lengths` are only consulted when cfg.masked_gap is set. With keep_cache
/// the pre-activations needed by backward() are retained.
template <typename S>
ForwardPass<S> forward_pass(const Tensor<S>& x_in, const ModelConfig& cfg, const ParamStore<S>& p,
                            std::span<const std::size_t> lengths = {}, bool keep_cache = false) {
  if (!(p.config() == cfg)) throw ShapeError("forward: parameters were built for a different config");
  ForwardPass<S> fp;
  fp.input = detail::as_batch(x_in);
  const std::size_t nb = fp.input.dim(0), nt = fp.input.dim(1);
  if (fp.input.dim(2) != cfg.channels)
    throw ShapeError("forward: input has " + std::to_string(fp.input.dim(2)) + " channels, model expects " +
                     std::to_string(cfg.channels));
  if (nt != cfg.seq_len)
    throw ShapeError("forward: input has " + std::to_string(nt) + " frames, model expects " +
                     std::to_string(cfg.seq_len));
  if (!lengths.empty() && lengths.size() != nb) throw ShapeError("forward: one length per sequence required");
  fp.lengths.assign(lengths.begin(), lengths.end());
  fp.cached = keep_cache;

  const std::size_t L = cfg.gating_levels, J = cfg.n_gscb;
  const S inv_j = S(1) / static_cast<S>(J);
  fp.entry_out = conv1d_causal(fp.input, p[ParamStore<S>::kEntryKernel], p[ParamStore<S>::kEntryBias], 1);

  fp.level_out.resize(cfg.n_gcb);
  if (keep_cache) {
    fp.value_pre.assign(cfg.n_gcb, std::vector<std::vector<Tensor<S>>>(L, std::vector<Tensor<S>>(J)));
    fp.gate_pre = fp.value_pre;
  }
  Tensor<S> g_cur = fp.entry_out;
  Tensor<S> skip(fp.entry_out.shape());
  for (std::size_t i = 0; i < cfg.n_gcb; ++i) {
    fp.block_in.push_back(g_cur);
    for (std::size_t l = 0; l < L; ++l) {
      const Tensor<S>& u = l == 0 ? fp.block_in[i] : fp.level_out[i][l - 1];
      const std::size_t d = cfg.dilation(i + 1, l + 1);
      Tensor<S> acc(u.shape());
      for (std::size_t j = 0; j < J; ++j) {
        const std::size_t base = p.gscb_base(i, l, j);
        Tensor<S> a = conv1d_causal(u, p[base], p[base + 1], d);
        Tensor<S> g = conv1d_causal(u, p[base + 2], p[base + 3], d);
        for (std::size_t e = 0; e < acc.size(); ++e) {
          const S r = a[e] > S(0) ? a[e] : S(0);
          const S q = g[e] > S(0) ? g[e] : S(0);
          acc[e] += r * sigmoid_scalar(q);
        }
        if (keep_cache) {
          fp.value_pre[i][l][j] = std::move(a);
          fp.gate_pre[i][l][j] = std::move(g);
        }
      }
      acc *= inv_j;
      fp.level_out[i].push_back(std::move(acc));
    }
    const Tensor<S>& f = fp.level_out[i].back();
    if (cfg.skip_mode == SkipMode::multi_scale || i + 1 == cfg.n_gcb) skip += f;
    if (i + 1 < cfg.n_gcb) {
      Tensor<S> h = f;
      h += fp.block_in[i];
      g_cur = std::move(h);
    }
  }
  fp.skip_sum = std::move(skip);
  fp.gtcm_out = leaky_relu(fp.skip_sum, static_cast<S>(cfg.leaky_alpha));
  fp.pooled = cfg.masked_gap && !fp.lengths.empty() ? masked_avg_pool(fp.gtcm_out, std::span<const std::size_t>(fp.lengths))
                                                    : global_avg_pool(fp.gtcm_out);
  fp.logits = dense(fp.pooled, p[p.head_weight()], p[p.head_bias()]);
  return fp;
}

/// Logits (length K) for one padded feature matrix.
template <typename S>
Tensor<S> forward(const FeatureMatrix& fm, const ModelConfig& cfg, const ParamStore<S>& p) {
  Tensor<S> x = fm.frames.template cast<S>();
  const std::size_t len = fm.true_len;
  auto fp = forward_pass(x, cfg, p, std::span<const std::size_t>(&len, 1));
  return fp.logits.reshaped(Shape{cfg.n_classes});
}

/// Parameter gradients (and optionally the input gradient) of
/// sum(grad_logits * logits) for a cached forward pass.
template <typename S>
ParamStore<S> backward(const ForwardPass<S>& fp, const Tensor<S>& grad_logits, const ModelConfig& cfg,
                       const ParamStore<S>& p, Tensor<S>* grad_input = nullptr) {
  if (!fp.cached) throw std::logic_error("backward: forward pass was run without keep_cache");
  if (grad_logits.size() != fp.logits.size()) throw ShapeError("backward: grad_logits shape mismatch");
  ParamStore<S> grads(cfg);
  const std::size_t L = cfg.gating_levels, J = cfg.n_gscb;
  const S inv_j = S(1) / static_cast<S>(J);

  // Head.
  const auto head = dense_backward(fp.pooled, p[p.head_weight()], grad_logits.reshaped(fp.logits.shape()));
  grads[grads.head_weight()] = head.weight;
  grads[grads.head_bias()] = head.bias;
  const bool masked = cfg.masked_gap && !fp.lengths.empty();
  Tensor<S> d_gtcm = avg_pool_backward(fp.gtcm_out.shape(), head.input,
                                       masked ? std::span<const std::size_t>(fp.lengths)
                                              : std::span<const std::size_t>());
  const Tensor<S> d_skip = leaky_relu_backward(fp.skip_sum, std::move(d_gtcm), static_cast<S>(cfg.leaky_alpha));

  // Blocks in reverse. d_next is the gradient flowing into H_i from block i+1.
  Tensor<S> d_next(fp.entry_out.shape());
  for (std::size_t ii = cfg.n_gcb; ii-- > 0;) {
    Tensor<S> d_level = (cfg.skip_mode == SkipMode::multi_scale || ii + 1 == cfg.n_gcb) ? d_skip
                                                                                          : Tensor<S>(d_skip.shape());
    if (ii + 1 < cfg.n_gcb) d_level += d_next;  // H_i = F_i + G_i
    Tensor<S> d_block_in = ii + 1 < cfg.n_gcb ? d_next : Tensor<S>(d_skip.shape());

    for (std::size_t l = L; l-- > 0;) {
      const Tensor<S>& u = l == 0 ? fp.block_in[ii] : fp.level_out[ii][l - 1];
      const std::size_t d = cfg.dilation(ii + 1, l + 1);
      Tensor<S> d_u(u.shape());
      for (std::size_t j = 0; j < J; ++j) {
        const std::size_t base = p.gscb_base(ii, l, j);
        const Tensor<S>& a = fp.value_pre[ii][l][j];
        const Tensor<S>& g = fp.gate_pre[ii][l][j];
        Tensor<S> da(a.shape()), dg(g.shape());
        for (std::size_t e = 0; e < a.size(); ++e) {
          const S dout = d_level[e] * inv_j;
          const S r = a[e] > S(0) ? a[e] : S(0);
          const S q = g[e] > S(0) ? g[e] : S(0);
          const S s = sigmoid_scalar(q);
          da[e] = a[e] > S(0) ? dout * s : S(0);
          dg[e] = g[e] > S(0) ? dout * r * s * (S(1) - s) : S(0);
        }
        auto gv = conv1d_causal_backward(u, p[base], p[base + 1], d, da);
        auto gg = conv1d_causal_backward(u, p[base + 2], p[base + 3], d, dg);
        grads[base] = std::move(gv.kernel);
        grads[base + 1] = std::move(gv.bias);
        grads[base + 2] = std::move(gg.kernel);
        grads[base + 3] = std::move(gg.bias);
        d_u += gv.input;
        d_u += gg.input;
      }
      if (l == 0) d_block_in += d_u;
      else d_level = std::move(d_u);
    }
    d_next = std::move(d_block_in);
  }

  auto ge = conv1d_causal_backward(fp.input, p[ParamStore<S>::kEntryKernel], p[ParamStore<S>::kEntryBias], 1,
                                   d_next, grad_input != nullptr);
  grads[ParamStore<S>::kEntryKernel] = std::move(ge.kernel);
  grads[ParamStore<S>::kEntryBias] = std::move(ge.bias);
  if (grad_input) *grad_input = std::move(ge.input);
  return grads;
}

}  // namespace gmtc
