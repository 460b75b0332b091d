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

#include <cmath>
#include <span>
#include <vector>

#include "gmtc/tensor.hpp"

namespace gmtc {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.93;
  double beta2 = 0.98;
  double epsilon = 1e-8;
};

/// Moment estimates for one set of parameters. Lazily sized on the first step.
template <typename S>
struct AdamState {
  AdamHyper hyper;
  std::size_t step = 0;
  std::vector<Tensor<S>> m;
  std::vector<Tensor<S>> v;
};

/// One bias-corrected Adam update applied in place.
template <typename S>
void adam_step(std::span<Tensor<S>> params, std::span<const Tensor<S>> grads, AdamState<S>& st) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.shape());
      st.v.emplace_back(p.shape());
    }
  }
  if (st.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!(params[i].shape() == grads[i].shape()) || !(params[i].shape() == st.m[i].shape()))
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));

  ++st.step;
  const auto& h = st.hyper;
  const double t = static_cast<double>(st.step);
  const S b1 = static_cast<S>(h.beta1), b2 = static_cast<S>(h.beta2);
  const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(h.beta1, t)));
  const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(h.beta2, t)));
  const S lr = static_cast<S>(h.lr), eps = static_cast<S>(h.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    S* p = params[i].data();
    const S* g = grads[i].data();
    S* m = st.m[i].data();
    S* v = st.v[i].data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      m[j] = b1 * m[j] + (S(1) - b1) * g[j];
      v[j] = b2 * v[j] + (S(1) - b2) * g[j] * g[j];
      p[j] -= lr * (m[j] * c1) / (std::sqrt(v[j] * c2) + eps);
    }
  }
}

}  // namespace gmtc
