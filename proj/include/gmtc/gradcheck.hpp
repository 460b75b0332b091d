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
#include <cmath>
#include <functional>

#include "gmtc/tensor.hpp"

namespace gmtc {

/// Central-difference check of `analytic` against d loss / d t.
/// Returns the worst elementwise |a - n| / max(|a|, |n|, floor).
inline double fd_max_rel_error(Tensor<double>& t, const Tensor<double>& analytic,
                               const std::function<double()>& loss, double h = 1e-6, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double keep = t[i];
    t[i] = keep + h;
    const double up = loss();
    t[i] = keep - h;
    const double down = loss();
    t[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

/// sum(weights * y), the scalar that turns an op output into a loss.
inline double weighted_sum(const Tensor<double>& y, const Tensor<double>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
  return s;
}

/// Pushes entries away from zero so kinks of piecewise-linear ops stay out of the stencil.
inline void avoid_kinks(Tensor<double>& t, double margin = 1e-3) {
  for (auto& v : t.values())
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
}

}  // namespace gmtc
