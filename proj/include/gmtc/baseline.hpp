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

#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gmtc/corpus.hpp"
#include "gmtc/mfcc.hpp"

namespace gmtc {

/// Mean of the true (unpadded) frames of one feature matrix.
inline std::vector<double> mean_frame(const FeatureMatrix& fm) {
  const std::size_t nc = fm.channels();
  std::vector<double> v(nc, 0.0);
  const std::size_t nt = std::max<std::size_t>(fm.true_len, 1);
  for (std::size_t t = 0; t < fm.true_len; ++t)
    for (std::size_t c = 0; c < nc; ++c) v[c] += fm.frames(t, c);
  for (auto& x : v) x /= static_cast<double>(nt);
  return v;
}

/// Euclidean nearest-centroid classifier over frame-averaged features.
/// Returns predictions for fold.test.
inline std::vector<std::size_t> nearest_centroid_predict(const std::vector<FeatureMatrix>& features,
                                                         const std::vector<std::size_t>& labels,
                                                         std::size_t n_classes, const Fold& fold) {
  if (features.size() != labels.size()) throw std::invalid_argument("nearest_centroid: features/labels differ in size");
  if (fold.train.empty() || fold.test.empty()) throw std::invalid_argument("nearest_centroid: empty split");
  const std::size_t nc = features[fold.train.front()].channels();
  std::vector<std::vector<double>> centroid(n_classes, std::vector<double>(nc, 0.0));
  std::vector<std::size_t> count(n_classes, 0);
  for (auto i : fold.train) {
    const auto v = mean_frame(features[i]);
    for (std::size_t c = 0; c < nc; ++c) centroid[labels[i]][c] += v[c];
    ++count[labels[i]];
  }
  for (std::size_t k = 0; k < n_classes; ++k)
    for (auto& x : centroid[k]) x /= static_cast<double>(std::max<std::size_t>(count[k], 1));

  std::vector<std::size_t> pred;
  for (auto i : fold.test) {
    const auto v = mean_frame(features[i]);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      if (count[k] == 0) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < nc; ++c) d += (v[c] - centroid[k][c]) * (v[c] - centroid[k][c]);
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    pred.push_back(arg);
  }
  return pred;
}

inline double nearest_centroid_accuracy(const std::vector<FeatureMatrix>& features,
                                        const std::vector<std::size_t>& labels, std::size_t n_classes,
                                        const Fold& fold) {
  const auto pred = nearest_centroid_predict(features, labels, n_classes, fold);
  std::size_t ok = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) ok += pred[j] == labels[fold.test[j]];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

}  // namespace gmtc
