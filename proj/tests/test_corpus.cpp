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

#include <algorithm>
#include <cmath>
#include <set>

#include "gmtc/baseline.hpp"
#include "gmtc/corpus.hpp"
#include "gmtc/pipeline.hpp"
#include "test_support.hpp"

using namespace gmtc;
using gmtc::testing::slurp;
using gmtc::testing::spit;
using gmtc::testing::TempDir;

namespace {

void touch_all(const std::filesystem::path& root, std::vector<std::string> rels) {
  for (const auto& r : rels) {
    std::filesystem::create_directories((root / r).parent_path());
    spit(root / r, "x");
  }
}

void check_plan_invariants(const SplitPlan& plan, const std::vector<std::size_t>& labels, std::size_t k) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> class_n(k, 0);
  for (auto l : labels) ++class_n[l];
  std::vector<int> seen_in_test(n, 0);
  for (const auto& f : plan.folds) {
    std::set<std::size_t> tr(f.train.begin(), f.train.end()), te(f.test.begin(), f.test.end());
    REQUIRE(tr.size() == f.train.size());
    REQUIRE(te.size() == f.test.size());
    REQUIRE(tr.size() + te.size() == n);
    for (auto i : te) {
      REQUIRE(!tr.count(i));
      ++seen_in_test[i];
    }
    const double share = plan.scheme == SplitScheme::holdout_80_20 ? 0.2 : 1.0 / static_cast<double>(plan.folds.size());
    std::vector<std::size_t> test_c(k, 0);
    for (auto i : f.test) ++test_c[labels[i]];
    for (std::size_t c = 0; c < k; ++c)
      REQUIRE(std::abs(static_cast<double>(test_c[c]) - share * static_cast<double>(class_n[c])) < 1.0);
  }
  if (plan.scheme != SplitScheme::holdout_80_20)
    for (auto s : seen_in_test) REQUIRE(s == 1);
}

}  // namespace

TEST_CASE("emodb names map through the sixth character", "[corpus][scan]") {
  TempDir dir("emodb");
  touch_all(dir.path(), {"wav/03a01Fa.wav", "wav/03a01Wa.wav", "wav/16b10Lb.wav", "wav/11a05Tc.wav",
                         "wav/03a01Xa.wav", "wav/readme.txt"});
  const auto m = scan_corpus(dir.path(), CorpusKind::emodb);
  REQUIRE(m.entries.size() == 4);
  CHECK(m.label_set == corpus_classes(CorpusKind::emodb));
  CHECK(m.entries[0].path == "wav/03a01Fa.wav");
  CHECK(m.entries[0].label == "happy");
  CHECK(m.entries[0].speaker == "03");
  CHECK(m.entries[1].label == "angry");
  CHECK(m.entries[2].label == "sad");
  CHECK(m.entries[3].label == "boredom");
  CHECK(m.rejects == std::vector<std::string>{"wav/03a01Xa.wav"});
}

TEST_CASE("ravdess, savee and casia conventions", "[corpus][scan]") {
  TempDir r("ravdess");
  touch_all(r.path(), {"Actor_12/03-01-05-01-02-01-12.wav", "Actor_01/03-01-02-02-01-01-01.wav",
                       "Actor_01/03-01-09-02-01-01-01.wav"});
  const auto rm = scan_corpus(r.path(), CorpusKind::ravdess);
  REQUIRE(rm.entries.size() == 2);
  CHECK(rm.entries[0].label == "calm");
  CHECK(rm.entries[0].speaker == "01");
  CHECK(rm.entries[1].label == "angry");
  CHECK(rm.entries[1].speaker == "12");

  TempDir s("savee");
  touch_all(s.path(), {"DC/a01.wav", "DC/sa03.wav", "JE_su15.wav", "KL/n30.wav", "KL/x01.wav"});
  const auto sm = scan_corpus(s.path(), CorpusKind::savee);
  REQUIRE(sm.entries.size() == 4);
  CHECK(sm.entries[0].label == "angry");
  CHECK(sm.entries[0].speaker == "DC");
  CHECK(sm.entries[1].label == "sad");
  CHECK(sm.entries[2].label == "surprise");
  CHECK(sm.entries[2].speaker == "JE");
  CHECK(sm.entries[3].label == "neutral");

  TempDir c("casia");
  touch_all(c.path(), {"liuchanhg/angry/201.wav", "wangzhe/Surprise/210.wav", "wangzhe/bored/1.wav"});
  const auto cm = scan_corpus(c.path(), CorpusKind::casia);
  REQUIRE(cm.entries.size() == 2);
  CHECK(cm.entries[0].label == "angry");
  CHECK(cm.entries[0].speaker == "liuchanhg");
  CHECK(cm.entries[1].label == "surprise");
}

TEST_CASE("scan results do not depend on creation order", "[corpus][scan]") {
  std::vector<std::string> names{"03a01Fa.wav", "08b02Nb.wav", "12a04Ac.wav", "15b09Ed.wav", "09a07Ta.wav"};
  TempDir a("ord_a"), b("ord_b");
  touch_all(a.path(), names);
  std::reverse(names.begin(), names.end());
  touch_all(b.path(), names);
  CHECK(scan_corpus(a.path(), CorpusKind::emodb) == scan_corpus(b.path(), CorpusKind::emodb));
}

TEST_CASE("scan errors", "[corpus][scan]") {
  TempDir empty("empty");
  CHECK_THROWS_AS(scan_corpus(empty.path(), CorpusKind::savee), DataError);
  CHECK_THROWS_AS(scan_corpus(empty / "missing", CorpusKind::emodb), DataError);
  CHECK_THROWS_AS(parse_corpus_kind("iemocap"), std::invalid_argument);
}

TEST_CASE("manifest csv parsing", "[corpus][csv]") {
  const std::string lf = "path,label,speaker,corpus\na.wav,sad,s1,x\nb.wav,angry,s2,x\nc.wav,sad,s1,x\n";
  const auto m = parse_manifest_csv(lf);
  CHECK(m.entries.size() == 3);
  CHECK(m.label_set == std::vector<std::string>{"angry", "sad"});
  CHECK(m.label_indices() == std::vector<std::size_t>{1, 0, 1});

  std::string crlf = lf;
  for (std::size_t p = crlf.find('\n'); p != std::string::npos; p = crlf.find('\n', p + 2)) crlf.insert(p, "\r");
  CHECK(parse_manifest_csv(crlf) == m);
  CHECK(parse_manifest_csv("\xEF\xBB\xBF" + lf) == m);
  CHECK(parse_manifest_csv("label,corpus,path,speaker\nsad,x,a.wav,s1\n").entries[0].path == "a.wav");

  CHECK_THROWS_AS(parse_manifest_csv(lf + "a.wav,happy,s3,x\n"), DataError);
  CHECK_THROWS_AS(parse_manifest_csv("path,label,corpus\na.wav,sad,x\n"), DataError);
  CHECK_THROWS_AS(parse_manifest_csv(lf, {"angry", "happy"}), DataError);
  CHECK_THROWS_AS(parse_manifest_csv(""), DataError);
  CHECK(parse_manifest_csv(lf, {"angry", "happy", "sad"}).label_set.size() == 3);

  Manifest q;
  q.label_set = {"a"};
  q.entries.push_back({"dir, with comma/\"q\".wav", "a", "s", "c"});
  CHECK(parse_manifest_csv(manifest_csv(q)) == q);

  TempDir dir("csv");
  save_manifest_csv(dir / "m.csv", m);
  CHECK(load_manifest_csv(dir / "m.csv") == m);
  CHECK_THROWS_AS(load_manifest_csv(dir / "none.csv"), DataError);
}

TEST_CASE("split plans are stratified partitions", "[corpus][splits]") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t count = 10 + rng() % 40;
      for (std::size_t i = 0; i < count; ++i) labels.push_back(c);
    }
    shuffle(labels, rng);
    for (auto scheme : {SplitScheme::holdout_80_20, SplitScheme::cv5, SplitScheme::cv10}) {
      const auto plan = make_splits(labels, k, scheme, trial);
      REQUIRE(plan.folds.size() == (scheme == SplitScheme::holdout_80_20 ? 1u : scheme == SplitScheme::cv5 ? 5u : 10u));
      check_plan_invariants(plan, labels, k);
      REQUIRE(make_splits(labels, k, scheme, trial) == plan);
    }
  }
}

TEST_CASE("split sizes and errors", "[corpus][splits]") {
  std::vector<std::size_t> ten(10, 0);
  for (std::size_t i = 5; i < 10; ++i) ten[i] = 1;
  const auto cv = make_splits(ten, 2, SplitScheme::cv5, 3);
  for (const auto& f : cv.folds) CHECK(f.test.size() == 2);

  std::vector<std::size_t> hundred(100);
  for (std::size_t i = 0; i < 100; ++i) hundred[i] = i % 3;
  const auto ho = make_splits(hundred, 3, SplitScheme::holdout_80_20, 1);
  CHECK(ho.folds[0].train.size() == 80);
  CHECK(ho.folds[0].test.size() == 20);

  CHECK_FALSE(make_splits(hundred, 3, SplitScheme::cv10, 1) == make_splits(hundred, 3, SplitScheme::cv10, 2));
  std::vector<std::size_t> thin{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(make_splits(thin, 2, SplitScheme::cv5, 0), DataError);
  CHECK_THROWS_AS(make_splits(std::vector<std::size_t>{0, 1, 1}, 2, SplitScheme::holdout_80_20, 0), DataError);
  CHECK_THROWS_AS(parse_split_scheme("loso"), std::invalid_argument);
}

TEST_CASE("synthetic corpus is deterministic and well formed", "[corpus][synth]") {
  TempDir a("syn_a"), b("syn_b");
  SynthOptions opt;
  opt.seed = 4;
  opt.per_class = 10;
  const auto ma = synth_generate(a.path(), opt);
  const auto mb = synth_generate(b.path(), opt);
  REQUIRE(ma.entries.size() == 60);
  CHECK(ma == mb);
  CHECK(ma.label_set.size() == 6);
  CHECK(load_manifest_csv(a / "manifest.csv") == ma);
  for (const auto& e : ma.entries) {
    REQUIRE(slurp(a / e.path) == slurp(b / e.path));
    const auto clip = read_wav(a / e.path);
    REQUIRE(clip.sample_rate == 22050);
    REQUIRE(clip.duration() >= 1.0 - 1e-9);
    REQUIRE(clip.duration() <= 3.0);
  }
  for (const auto& [label, count] : ma.class_counts()) CHECK(count == 10);

  opt.seed = 5;
  TempDir c("syn_c");
  const auto mc = synth_generate(c.path(), opt);
  CHECK(slurp(a / ma.entries[0].path) != slurp(c / mc.entries[0].path));

  opt.per_class = 0;
  CHECK_THROWS_AS(synth_generate(c.path(), opt), std::invalid_argument);
}

TEST_CASE("frame-averaged MFCC centroids separate the synthetic classes", "[corpus][synth][oracle]") {
  TempDir dir("syn_c");
  SynthOptions opt;
  opt.seed = 1;
  const auto m = synth_generate(dir.path(), opt);
  const auto ex = extract_features(dir.path(), m, std::nullopt, thread_budget());
  REQUIRE(ex.failures.empty());
  const auto labels = ex.manifest.label_indices();
  const auto plan = make_splits(ex.manifest, SplitScheme::holdout_80_20, 0);
  const double acc = nearest_centroid_accuracy(ex.features, labels, m.label_set.size(), plan.folds[0]);
  INFO("held-out centroid accuracy " << acc);
  CHECK(acc > 0.6);
  CHECK(acc < 1.0);
}

TEST_CASE("feature extraction resamples and reports failures", "[corpus][pipeline]") {
  TempDir dir("pipe");
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(16000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = static_cast<float>(0.3 * std::sin(0.07 * i));
  write_wav(dir / "ok.wav", clip);
  spit(dir / "bad.wav", "garbage");
  const auto m = parse_manifest_csv("path,label,speaker,corpus\nok.wav,a,s,x\nbad.wav,b,s,x\nmissing.wav,a,s,x\n");
  const auto one = extract_features(dir.path(), m, std::nullopt, 1);
  const auto many = extract_features(dir.path(), m, std::nullopt, 4);
  REQUIRE(one.features.size() == 1);
  CHECK(one.features[0].true_len == 77);
  CHECK(one.t_max == 96);
  CHECK(one.failures.size() == 2);
  CHECK(one.manifest.entries.size() == 1);
  CHECK(many.features == one.features);
  CHECK(many.failures == one.failures);
  CHECK(extract_features(dir.path(), m, 50, 1).truncated == 1);
}
