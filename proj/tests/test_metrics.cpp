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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "gmtc/metrics.hpp"
#include "gmtc/tensor.hpp"

using namespace gmtc;

TEST_CASE("hand case with a collapsed predictor", "[metrics]") {
  const auto r = compute_report({0, 0, 0, 1}, {0, 0, 0, 0}, {"A", "B"});
  CHECK(r.war == 0.75);
  CHECK(r.uar == 0.5);
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{3, 0}, {1, 0}});
  CHECK(r.n == 4);
  CHECK(r.confusion_csv() == "true\\pred,A,B\nA,3,0\nB,1,0\n");
  const auto j = r.to_json();
  CHECK(j["per_class_recall"]["A"] == 1.0);
  CHECK(j["per_class_recall"]["B"] == 0.0);

  const auto perfect = compute_report({2, 0, 1}, {2, 0, 1}, {"a", "b", "c"});
  CHECK(perfect.war == 1.0);
  CHECK(perfect.uar == 1.0);
}

TEST_CASE("random reports agree with brute-force counting", "[metrics][oracle]") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng() % 7, n = 1 + rng() % 80;
    std::vector<std::size_t> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng() % k;
      pred[i] = rng() % 3 == 0 ? truth[i] : rng() % k;
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    const auto r = compute_report(truth, pred, names);

    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += truth[i] == pred[i];
    REQUIRE(r.war == static_cast<double>(hits) / static_cast<double>(n));

    double recall_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t total = 0, right = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (truth[i] == c) {
          ++total;
          right += pred[i] == c;
        }
      if (total == 0) {
        REQUIRE_FALSE(r.per_class_recall[c].has_value());
        continue;
      }
      const double rc = static_cast<double>(right) / static_cast<double>(total);
      REQUIRE(*r.per_class_recall[c] == rc);
      recall_sum += rc;
      ++present;
    }
    REQUIRE(r.uar == recall_sum / static_cast<double>(present));
    REQUIRE(r.warnings.size() == k - present);

    std::size_t total = 0;
    for (const auto& row : r.confusion)
      for (auto v : row) total += v;
    REQUIRE(total == n);
    REQUIRE(r.war >= 0.0);
    REQUIRE(r.uar <= 1.0);
  }
}

TEST_CASE("UAR ignores class frequency and sample order", "[metrics]") {
  const std::vector<std::size_t> truth{0, 0, 1, 1, 1, 2}, pred{0, 1, 1, 0, 0, 2};
  const std::vector<std::string> names{"x", "y", "z"};
  const auto base = compute_report(truth, pred, names);

  auto t2 = truth, p2 = pred;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == 1) {
      t2.push_back(truth[i]);
      p2.push_back(pred[i]);
    }
  const auto dup = compute_report(t2, p2, names);
  CHECK(dup.uar == Catch::Approx(base.uar).margin(1e-15));
  CHECK(dup.war != base.war);

  std::vector<std::size_t> ti{5, 2, 0, 4, 1, 3};
  std::vector<std::size_t> tp, pp;
  for (auto i : ti) {
    tp.push_back(truth[i]);
    pp.push_back(pred[i]);
  }
  const auto perm = compute_report(tp, pp, names);
  CHECK(perm.war == base.war);
  CHECK(perm.uar == base.uar);
  CHECK(perm.confusion == base.confusion);
}

TEST_CASE("report errors", "[metrics]") {
  CHECK_THROWS_AS(compute_report({0, 1}, {0}, {"a", "b"}), std::invalid_argument);
  CHECK_THROWS_AS(compute_report({}, {}, {"a", "b"}), std::invalid_argument);
  CHECK_THROWS_AS(compute_report({0, 2}, {0, 1}, {"a", "b"}), std::out_of_range);
}

TEST_CASE("summary statistics use the population deviation", "[metrics]") {
  const auto s = summarize({0.8, 0.9});
  CHECK(s.mean == Catch::Approx(0.85));
  CHECK(s.std == Catch::Approx(0.05));
  CHECK(s.max == 0.9);
  CHECK(s.min == 0.8);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> xs(1 + rng() % 10);
    for (auto& x : xs) x = uniform(rng, 0, 1);
    const auto t = summarize(xs);
    REQUIRE(t.min <= t.mean);
    REQUIRE(t.mean <= t.max);
    REQUIRE(t.std >= 0.0);
  }
  CHECK_THROWS(summarize({}));
}
