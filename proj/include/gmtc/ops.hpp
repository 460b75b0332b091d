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

// Forward and reverse-mode primitives for the gated temporal conv network.
//
// Sequence tensors are either T x C (one utterance) or B x T x C (a batch of
// equal-length utterances). Every op here is a pure function of its inputs.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>

#include "gmtc/tensor.hpp"

namespace gmtc {

/// Weights of one dilated causal convolution.
template <typename S>
struct ConvParams {
  Tensor<S> kernel;  // (out_channels, in_channels, kernel_size)
  Tensor<S> bias;    // (out_channels)
  std::size_t dilation = 1;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t kernel_size() const { return kernel.dim(2); }
};

template <typename S>
struct ConvGrads {
  Tensor<S> input;
  Tensor<S> kernel;
  Tensor<S> bias;
};

namespace detail {

struct SeqDims {
  std::size_t batch, frames, channels;
};

template <typename S>
SeqDims seq_dims(const Tensor<S>& x, const char* op) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw ShapeError(std::string(op) + ": expected T x C or B x T x C, got " + x.shape().str());
}

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<RowMat<S>>;
template <typename S>
using CMapMat = Eigen::Map<const RowMat<S>>;

template <typename S>
void check_conv(const Tensor<S>& kernel, const Tensor<S>& bias, std::size_t dilation,
                std::size_t in_channels, const char* op) {
  if (kernel.rank() != 3) throw ShapeError(std::string(op) + ": kernel must be rank 3");
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))
    throw ShapeError(std::string(op) + ": bias length must equal out_channels");
  if (kernel.dim(1) != in_channels)
    throw ShapeError(std::string(op) + ": input has " + std::to_string(in_channels) +
                     " channels, kernel expects " + std::to_string(kernel.dim(1)));
  if (dilation == 0) throw std::invalid_argument(std::string(op) + ": dilation must be positive");
}

// Tap i of the kernel as an in x out matrix (transposed for right-multiplication).
template <typename S>
RowMat<S> tap_matrix(const Tensor<S>& kernel, std::size_t tap) {
  const std::size_t co = kernel.dim(0), ci = kernel.dim(1), k = kernel.dim(2);
  RowMat<S> w(ci, co);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t c = 0; c < ci; ++c) w(c, o) = kernel[(o * ci + c) * k + tap];
  return w;
}

}  // namespace detail

/// out[s] = bias + sum_i W_i * x[s - d*i]; frames before 0 read as zero.
template <typename S>
Tensor<S> conv1d_causal(const Tensor<S>& x, const Tensor<S>& kernel, const Tensor<S>& bias,
                        std::size_t dilation) {
  const auto [nb, nt, ci] = detail::seq_dims(x, "conv1d_causal");
  detail::check_conv(kernel, bias, dilation, ci, "conv1d_causal");
  const std::size_t co = kernel.dim(0);
  Tensor<S> out = x.rank() == 2 ? Tensor<S>(Shape{nt, co}) : Tensor<S>(Shape{nb, nt, co});

  detail::CMapMat<S> xm(x.data(), nb * nt, ci);
  detail::MapMat<S> om(out.data(), nb * nt, co);
  om.rowwise() = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias.data(), co);

  for (std::size_t tap = 0; tap < kernel.dim(2); ++tap) {
    const std::size_t shift = tap * dilation;
    if (shift >= nt) break;
    const auto w = detail::tap_matrix(kernel, tap);
    const auto len = static_cast<Eigen::Index>(nt - shift);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto row = static_cast<Eigen::Index>(b * nt);
      om.block(row + static_cast<Eigen::Index>(shift), 0, len, co).noalias() +=
          xm.block(row, 0, len, ci) * w;
    }
  }
  return out;
}

template <typename S>
Tensor<S> conv1d_causal(const Tensor<S>& x, const ConvParams<S>& p) {
  return conv1d_causal(x, p.kernel, p.bias, p.dilation);
}

/// Gradients of sum(grad_out * conv1d_causal(x, kernel, bias, dilation)).
template <typename S>
ConvGrads<S> conv1d_causal_backward(const Tensor<S>& x, const Tensor<S>& kernel, const Tensor<S>& bias,
                                    std::size_t dilation, const Tensor<S>& grad_out,
                                    bool want_input_grad = true) {
  const auto [nb, nt, ci] = detail::seq_dims(x, "conv1d_causal_backward");
  detail::check_conv(kernel, bias, dilation, ci, "conv1d_causal_backward");
  const std::size_t co = kernel.dim(0), k = kernel.dim(2);
  const auto g = detail::seq_dims(grad_out, "conv1d_causal_backward");
  if (g.batch != nb || g.frames != nt || g.channels != co)
    throw ShapeError("conv1d_causal_backward: grad_out shape " + grad_out.shape().str() +
                     " inconsistent with forward");

  ConvGrads<S> grads{want_input_grad ? Tensor<S>(x.shape()) : Tensor<S>(),
                     Tensor<S>(kernel.shape()), Tensor<S>(bias.shape())};
  detail::CMapMat<S> xm(x.data(), nb * nt, ci);
  detail::CMapMat<S> gm(grad_out.data(), nb * nt, co);

  Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> gb(grads.bias.data(), co);
  gb = gm.colwise().sum();

  for (std::size_t tap = 0; tap < k; ++tap) {
    const std::size_t shift = tap * dilation;
    if (shift >= nt) break;
    const auto len = static_cast<Eigen::Index>(nt - shift);
    detail::RowMat<S> gw = detail::RowMat<S>::Zero(ci, co);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto row = static_cast<Eigen::Index>(b * nt);
      gw.noalias() += xm.block(row, 0, len, ci).transpose() *
                      gm.block(row + static_cast<Eigen::Index>(shift), 0, len, co);
    }
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t c = 0; c < ci; ++c) grads.kernel[(o * ci + c) * k + tap] = gw(c, o);

    if (want_input_grad) {
      const auto w = detail::tap_matrix(kernel, tap);
      detail::MapMat<S> dx(grads.input.data(), nb * nt, ci);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto row = static_cast<Eigen::Index>(b * nt);
        dx.block(row, 0, len, ci).noalias() +=
            gm.block(row + static_cast<Eigen::Index>(shift), 0, len, co) * w.transpose();
      }
    }
  }
  return grads;
}

template <typename S>
ConvGrads<S> conv1d_causal_backward(const Tensor<S>& x, const ConvParams<S>& p, const Tensor<S>& grad_out,
                                    bool want_input_grad = true) {
  return conv1d_causal_backward(x, p.kernel, p.bias, p.dilation, grad_out, want_input_grad);
}

// ---- elementwise ----------------------------------------------------------

template <typename S>
S sigmoid_scalar(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
Tensor<S> relu(Tensor<S> x) {
  for (auto& v : x.values()) v = v > S(0) ? v : S(0);
  return x;
}

template <typename S>
Tensor<S> sigmoid(Tensor<S> x) {
  for (auto& v : x.values()) v = sigmoid_scalar(v);
  return x;
}

template <typename S>
Tensor<S> leaky_relu(Tensor<S> x, S alpha) {
  for (auto& v : x.values()) v = v >= S(0) ? v : alpha * v;
  return x;
}

/// Reverse pass of relu given the forward input.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& x, Tensor<S> grad) {
  if (!(x.shape() == grad.shape())) throw ShapeError("relu_backward: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > S(0))) grad[i] = S(0);
  return grad;
}

/// Reverse pass of sigmoid given the forward input.
template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& x, Tensor<S> grad) {
  if (!(x.shape() == grad.shape())) throw ShapeError("sigmoid_backward: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const S s = sigmoid_scalar(x[i]);
    grad[i] *= s * (S(1) - s);
  }
  return grad;
}

template <typename S>
Tensor<S> leaky_relu_backward(const Tensor<S>& x, Tensor<S> grad, S alpha) {
  if (!(x.shape() == grad.shape())) throw ShapeError("leaky_relu_backward: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < S(0)) grad[i] *= alpha;
  return grad;
}

// ---- pooling / classifier ---------------------------------------------------

/// Mean over the time axis: T x C -> C, or B x T x C -> B x C.
template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  const auto [nb, nt, nc] = detail::seq_dims(x, "global_avg_pool");
  Tensor<S> out = x.rank() == 2 ? Tensor<S>(Shape{nc}) : Tensor<S>(Shape{nb, nc});
  const S inv = S(1) / static_cast<S>(nt);
  for (std::size_t b = 0; b < nb; ++b) {
    S* o = out.data() + b * nc;
    const S* xb = x.data() + b * nt * nc;
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t c = 0; c < nc; ++c) o[c] += xb[t * nc + c];
    for (std::size_t c = 0; c < nc; ++c) o[c] *= inv;
  }
  return out;
}

/// Mean over the first lengths[b] frames of each sequence.
template <typename S>
Tensor<S> masked_avg_pool(const Tensor<S>& x, std::span<const std::size_t> lengths) {
  const auto [nb, nt, nc] = detail::seq_dims(x, "masked_avg_pool");
  if (lengths.size() != nb) throw ShapeError("masked_avg_pool: one length per sequence required");
  Tensor<S> out = x.rank() == 2 ? Tensor<S>(Shape{nc}) : Tensor<S>(Shape{nb, nc});
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t len = std::clamp<std::size_t>(lengths[b], 1, nt);
    S* o = out.data() + b * nc;
    const S* xb = x.data() + b * nt * nc;
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < nc; ++c) o[c] += xb[t * nc + c];
    for (std::size_t c = 0; c < nc; ++c) o[c] /= static_cast<S>(len);
  }
  return out;
}

/// Spreads pooled gradients back over the frames that were averaged.
template <typename S>
Tensor<S> avg_pool_backward(const Shape& input_shape, const Tensor<S>& grad,
                            std::span<const std::size_t> lengths = {}) {
  Tensor<S> dx(input_shape);
  const auto [nb, nt, nc] = detail::seq_dims(dx, "avg_pool_backward");
  if (grad.size() != nb * nc) throw ShapeError("avg_pool_backward: gradient shape mismatch");
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t len = lengths.empty() ? nt : std::clamp<std::size_t>(lengths[b], 1, nt);
    const S inv = S(1) / static_cast<S>(len);
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < nc; ++c) dx[(b * nt + t) * nc + c] = grad[b * nc + c] * inv;
  }
  return dx;
}

/// Affine map W x + b for x of shape C or N x C, W of shape K x C.
template <typename S>
Tensor<S> dense(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (w.rank() != 2 || b.rank() != 1 || b.dim(0) != w.dim(0))
    throw ShapeError("dense: W must be K x C and b length K");
  const std::size_t k = w.dim(0), c = w.dim(1);
  if (x.shape().back() != c || x.rank() > 2)
    throw ShapeError("dense: input " + x.shape().str() + " does not match W " + w.shape().str());
  const std::size_t n = x.rank() == 1 ? 1 : x.dim(0);
  Tensor<S> out = x.rank() == 1 ? Tensor<S>(Shape{k}) : Tensor<S>(Shape{n, k});
  detail::CMapMat<S> xm(x.data(), n, c);
  detail::CMapMat<S> wm(w.data(), k, c);
  detail::MapMat<S> om(out.data(), n, k);
  Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> bm(b.data(), k);
  om.noalias() = xm * wm.transpose();
  om.rowwise() += bm;
  return out;
}

template <typename S>
struct DenseGrads {
  Tensor<S> input;
  Tensor<S> weight;
  Tensor<S> bias;
};

template <typename S>
DenseGrads<S> dense_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& grad_out) {
  const std::size_t k = w.dim(0), c = w.dim(1);
  const std::size_t n = x.rank() == 1 ? 1 : x.dim(0);
  if (grad_out.size() != n * k) throw ShapeError("dense_backward: gradient shape mismatch");
  DenseGrads<S> g{Tensor<S>(x.shape()), Tensor<S>(w.shape()), Tensor<S>(Shape{k})};
  detail::CMapMat<S> xm(x.data(), n, c);
  detail::CMapMat<S> wm(w.data(), k, c);
  detail::CMapMat<S> gm(grad_out.data(), n, k);
  detail::MapMat<S>(g.input.data(), n, c).noalias() = gm * wm;
  detail::MapMat<S>(g.weight.data(), k, c).noalias() = gm.transpose() * xm;
  Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(g.bias.data(), k) = gm.colwise().sum();
  return g;
}

/// Row-wise softmax with max subtraction; accepts K or N x K.
template <typename S>
Tensor<S> softmax(Tensor<S> z) {
  const std::size_t k = z.shape().back();
  const std::size_t n = z.size() / k;
  for (std::size_t r = 0; r < n; ++r) {
    S* row = z.data() + r * k;
    const S m = *std::max_element(row, row + k);
    S sum = S(0);
    for (std::size_t i = 0; i < k; ++i) sum += row[i] = std::exp(row[i] - m);
    for (std::size_t i = 0; i < k; ++i) row[i] /= sum;
  }
  return z;
}

/// -ln(probs[label]).
template <typename S>
S cross_entropy(const Tensor<S>& probs, std::size_t label) {
  if (label >= probs.size())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[label], std::numeric_limits<S>::min()));
}

/// Gradient of cross_entropy(softmax(z), label) with respect to z.
template <typename S>
Tensor<S> softmax_cross_entropy_grad(const Tensor<S>& probs, std::size_t label) {
  if (label >= probs.size())
    throw std::out_of_range("softmax_cross_entropy_grad: label out of range");
  Tensor<S> g = probs;
  g[label] -= S(1);
  return g;
}

}  // namespace gmtc
