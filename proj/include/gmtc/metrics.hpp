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
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gmtc {

/// Recall summary of one evaluation run. Rows of `confusion` are true classes.
struct EvalReport {
  std::vector<std::string> labels;
  double war = 0.0;
  double uar = 0.0;
  std::vector<std::optional<double>> per_class_recall;  // nullopt: class absent from the test set
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t n = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["war"] = war;
    j["uar"] = uar;
    j["n"] = n;
    j["labels"] = labels;
    nlohmann::json recall = nlohmann::json::object();
    for (std::size_t k = 0; k < labels.size(); ++k)
      recall[labels[k]] = per_class_recall[k] ? nlohmann::json(*per_class_recall[k]) : nlohmann::json(nullptr);
    j["per_class_recall"] = recall;
    j["confusion"] = confusion;
    j["warnings"] = warnings;
    return j;
  }

  std::string confusion_csv() const {
    std::ostringstream os;
    os << "true\\pred";
    for (const auto& l : labels) os << ',' << l;
    os << '\n';
    for (std::size_t r = 0; r < labels.size(); ++r) {
      os << labels[r];
      for (auto c : confusion[r]) os << ',' << c;
      os << '\n';
    }
    return os.str();
  }
};

/// WAR (= accuracy), UAR (mean recall over classes present in the truth) and the confusion matrix.
inline EvalReport compute_report(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                                 const std::vector<std::string>& label_set) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("compute_report: " + std::to_string(truth.size()) + " labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  if (truth.empty()) throw std::invalid_argument("compute_report: empty evaluation set");
  const std::size_t k = label_set.size();
  EvalReport rep;
  rep.labels = label_set;
  rep.n = truth.size();
  rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= k || predicted[i] >= k) throw std::out_of_range("compute_report: label index out of range");
    ++rep.confusion[truth[i]][predicted[i]];
    correct += truth[i] == predicted[i];
  }
  rep.war = static_cast<double>(correct) / static_cast<double>(rep.n);

  rep.per_class_recall.resize(k);
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0;
    for (auto v : rep.confusion[c]) row += v;
    if (row == 0) {
      rep.warnings.push_back("class '" + label_set[c] + "' absent from test set; excluded from UAR");
      continue;
    }
    const double r = static_cast<double>(rep.confusion[c][c]) / static_cast<double>(row);
    rep.per_class_recall[c] = r;
    recall_sum += r;
    ++present;
  }
  rep.uar = recall_sum / static_cast<double>(present);
  return rep;
}

struct SummaryStat {
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

/// Mean, population standard deviation and range.
inline SummaryStat summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("summarize: no values");
  SummaryStat s{0.0, 0.0, xs.front(), xs.front()};
  for (double x : xs) {
    s.mean += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
  return s;
}

}  // namespace gmtc
