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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmtc {

/// Thrown when operand shapes (or channel counts) do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents of a rank-1..3 tensor.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 3;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) {
    if (dims.size() == 0 || dims.size() > kMaxRank)
      throw ShapeError("tensor rank must be 1..3");
    rank_ = dims.size();
    std::copy(dims.begin(), dims.end(), dims_.begin());
    for (std::size_t i = 0; i < rank_; ++i)
      if (dims_[i] == 0) throw ShapeError("tensor extents must be positive");
  }
  explicit Shape(std::span<const std::size_t> dims) {
    if (dims.empty() || dims.size() > kMaxRank)
      throw ShapeError("tensor rank must be 1..3");
    rank_ = dims.size();
    std::copy(dims.begin(), dims.end(), dims_.begin());
    for (std::size_t i = 0; i < rank_; ++i)
      if (dims_[i] == 0) throw ShapeError("tensor extents must be positive");
  }

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  std::size_t back() const { return dims_[rank_ - 1]; }
  std::size_t numel() const {
    std::size_t n = rank_ ? 1 : 0;
    for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }
  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.rank_ == b.rank_ &&
           std::equal(a.dims_.begin(), a.dims_.begin() + a.rank_, b.dims_.begin());
  }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < rank_; ++i) os << (i ? "," : "") << dims_[i];
    os << ')';
    return os.str();
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Dense row-major tensor, last axis fastest.
template <typename S>
class Tensor {
 public:
  using value_type = S;

  Tensor() = default;
  explicit Tensor(Shape shape, S fill = S(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<S> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  static Tensor vector(std::initializer_list<S> values) {
    return Tensor(Shape{values.size()}, std::vector<S>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::span<S> values() { return data_; }
  std::span<const S> values() const { return data_; }
  std::vector<S>& storage() { return data_; }
  const std::vector<S>& storage() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }
  S& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  S& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const S& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    if (s.numel() != size()) throw ShapeError("reshape changes element count");
    return Tensor(s, data_);
  }

  template <typename D>
  Tensor<D> cast() const {
    return Tensor<D>(shape_, std::vector<D>(data_.begin(), data_.end()));
  }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(S a) {
    for (auto& x : data_) x *= a;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](S x) { return std::isfinite(x); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void require_same(const Tensor& o, const char* what) const {
    if (!(shape_ == o.shape_))
      throw ShapeError(std::string(what) + ": shape " + shape_.str() + " vs " + o.shape_.str());
  }

  Shape shape_;
  std::vector<S> data_;
};

/// Seeded random source used for all initialization and shuffling.
using Rng = std::mt19937_64;

/// Uniform in [lo, hi) from the top 53 bits of the generator; the same on every platform.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Standard normal via Box-Muller.
inline double gaussian(Rng& rng) {
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Fisher-Yates with the portable uniform source.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Xavier/Glorot uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename S>
void xavier_uniform(Tensor<S>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : t.values()) x = static_cast<S>(uniform(rng, -a, a));
}

template <typename S>
Tensor<S> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<S> t(shape);
  for (auto& x : t.values()) x = static_cast<S>(uniform(rng, lo, hi));
  return t;
}

}  // namespace gmtc
