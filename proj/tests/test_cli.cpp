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
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include "gmtc/gmtc.hpp"
#include "test_support.hpp"

using namespace gmtc;
using namespace gmtc::testing;
namespace fs = std::filesystem;

namespace {

int gmtc_run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("GMTC_THREADS=2 '") + GMTC_CLI_PATH + "' " + args + " > '" + log.string() +
                          "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  return n;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// One synthetic corpus and short-clip cache shared by every case in this file.
struct Workspace {
  TempDir dir{"cli"};
  fs::path corpus = dir / "syn";
  fs::path cache = dir / "feats.gmtc";
  fs::path log = dir / "log.txt";
  fs::path cfg = dir / "tiny.cfg";

  Workspace() {
    REQUIRE(gmtc_run("synth --seed 5 --per-class 10 --out '" + corpus.string() + "'", log) == 0);
    REQUIRE(gmtc_run("features --corpus '" + (corpus / "manifest.csv").string() + "' --root '" + corpus.string() +
                         "' --out '" + cache.string() + "' --tmax 48",
                     log) == 0);
    spit(cfg, "n_gcb=2\nn_gscb=1\nmax_epochs=2\npatience=2\nbatch_size=16\n");
  }

  std::string run_log() const { return slurp(log); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("synth writes a labelled corpus deterministically", "[cli][synth]") {
  auto& w = ws();
  std::size_t wavs = count_files(w.corpus, ".wav");
  CHECK(wavs == 60);
  const auto m = load_manifest_csv(w.corpus / "manifest.csv");
  CHECK(m.entries.size() == 60);
  CHECK(m.class_counts().size() == 6);
  CHECK(fs::exists(w.corpus / "run_manifest.json"));

  TempDir again("cli_synth");
  REQUIRE(gmtc_run("synth --seed 5 --per-class 10 --out " + q(again.path()), w.log) == 0);
  for (const auto& e : m.entries) REQUIRE(slurp(again / e.path) == slurp(w.corpus / e.path));
  CHECK(slurp(again / "manifest.csv") == slurp(w.corpus / "manifest.csv"));

  CHECK(gmtc_run("synth --seed 5 --per-class 0 --out " + q(again / "zero"), w.log) == 1);
  CHECK(gmtc_run("synth --per-class 3", w.log) == 1);
}

TEST_CASE("features writes a cache, a sidecar manifest and a run manifest", "[cli][features]") {
  auto& w = ws();
  const auto feats = cache_read(w.cache);
  REQUIRE(feats.size() == 60);
  for (const auto& f : feats) CHECK(f.frames.shape() == Shape{48, 39});
  CHECK(load_manifest_csv(w.cache.string() + ".manifest.csv").entries.size() == 60);

  const auto rm = nlohmann::json::parse(slurp(w.cache.string() + ".run_manifest.json"));
  CHECK(rm["command"] == "features");
  CHECK(rm.contains("git_describe"));
  CHECK(rm.contains("wall_clock_seconds"));
  CHECK(rm["artifacts"].size() == 2);

  const auto again = w.dir / "again.gmtc";
  REQUIRE(gmtc_run("features --corpus " + q(w.corpus / "manifest.csv") + " --root " + q(w.corpus) + " --out " +
                       q(again) + " --tmax 48",
                   w.log) == 0);
  CHECK(slurp(again) == slurp(w.cache));

  const auto normed = w.dir / "normed.gmtc";
  REQUIRE(gmtc_run("features --normalize --corpus " + q(w.corpus / "manifest.csv") + " --root " + q(w.corpus) +
                       " --out " + q(normed) + " --tmax 48",
                   w.log) == 0);
  const auto nf = cache_read(normed);
  REQUIRE(nf.size() == feats.size());
  for (std::size_t i = 0; i < nf.size(); ++i) {
    auto expect = feats[i];
    normalize_utterance(expect);
    REQUIRE(nf[i].frames == expect.frames);
  }

  CHECK(gmtc_run("features --corpus emodb --root " + q(w.dir / "missing") + " --out " + q(w.dir / "x.gmtc"), w.log) == 2);
  CHECK(gmtc_run("features --corpus nosuchcorpus --root " + q(w.corpus) + " --out " + q(w.dir / "x.gmtc"), w.log) == 1);
}

TEST_CASE("features exits nonzero when more than 1% of files fail", "[cli][features]") {
  auto& w = ws();
  TempDir broken("cli_broken");
  fs::copy(w.corpus, broken.path(), fs::copy_options::recursive);
  const auto m = load_manifest_csv(broken / "manifest.csv");
  spit(broken / m.entries[7].path, "not a wav file");
  const auto out = broken / "f.gmtc";
  CHECK(gmtc_run("features --corpus " + q(broken / "manifest.csv") + " --root " + q(broken.path()) + " --out " +
                     q(out) + " --tmax 48",
                 w.log) == 2);
  CHECK(w.run_log().find(m.entries[7].path) != std::string::npos);
  CHECK(cache_read(out).size() == 59);
}

TEST_CASE("train on cv5 writes five checkpoints and reproduces itself", "[cli][train]") {
  auto& w = ws();
  const auto out1 = w.dir / "cv_a", out2 = w.dir / "cv_b";
  const std::string common = "train --features " + q(w.cache) + " --split cv5 --seed 7 --config " + q(w.cfg);
  REQUIRE(gmtc_run(common + " --out " + q(out1), w.log) == 0);
  REQUIRE(gmtc_run(common + " --out " + q(out2), w.log) == 0);
  CHECK(count_files(out1, ".gmck") == 5);

  const auto summary = nlohmann::json::parse(slurp(out1 / "summary.json"));
  CHECK(summary["folds"].size() == 5);
  CHECK(summary.contains("war"));
  CHECK(summary["war"].contains("max"));
  CHECK(summary["war"].contains("std"));
  for (const char* f : {"summary.json", "config.txt", "splits.csv"}) CHECK(slurp(out1 / f) == slurp(out2 / f));
  for (int k = 0; k < 5; ++k) {
    const auto fold = "fold_" + std::to_string(k);
    for (const char* f : {"checkpoint.gmck", "report.json", "confusion.csv"})
      REQUIRE(slurp(out1 / fold / f) == slurp(out2 / fold / f));
    REQUIRE(strip_seconds(slurp(out1 / fold / "history.csv")) == strip_seconds(slurp(out2 / fold / "history.csv")));
  }
  const auto ck = checkpoint_load(out1 / "fold_0" / "checkpoint.gmck");
  CHECK(ck.config.n_gcb == 2);
  CHECK(ck.config.seq_len == 48);
  CHECK(ck.meta.get("seed", std::string()) == "7");
  CHECK(line_count(slurp(out1 / "fold_0" / "history.csv")) == 3);
}

TEST_CASE("train argument and data errors", "[cli][train]") {
  auto& w = ws();
  CHECK(gmtc_run("train --features " + q(w.dir / "absent.gmtc") + " --out " + q(w.dir / "e1"), w.log) == 2);
  spit(w.dir / "bad.cfg", "n_gcb=2\nwidth=9\n");
  CHECK(gmtc_run("train --features " + q(w.cache) + " --config " + q(w.dir / "bad.cfg") + " --out " + q(w.dir / "e2"),
                 w.log) == 1);
  CHECK(w.run_log().find("width") != std::string::npos);
  CHECK(gmtc_run("train --features " + q(w.cache) + " --split cv3 --out " + q(w.dir / "e3"), w.log) == 1);
  spit(w.dir / "long.cfg", "seq_len=64\nmax_epochs=1\npatience=1\n");
  CHECK(gmtc_run("train --features " + q(w.cache) + " --config " + q(w.dir / "long.cfg") + " --out " + q(w.dir / "e4"),
                 w.log) == 2);
}

TEST_CASE("ablate emits one row per variant", "[cli][ablate]") {
  auto& w = ws();
  const auto drd = w.dir / "ab_drd";
  REQUIRE(gmtc_run("ablate --study drd --params-only --features " + q(w.cache) + " --out " + q(drd), w.log) == 0);
  const auto csv = slurp(drd / "ablation.csv");
  CHECK(line_count(csv) == 5);
  for (const char* row : {"drd,ours-256,260604,", "drd,ours-128,223632,", "drd,raw-128,260604,", "drd,raw-256,297576,"})
    CHECK(csv.find(row) != std::string::npos);

  const auto scale = w.dir / "ab_scale";
  REQUIRE(gmtc_run("ablate --study scale --max-epochs 1 --seed 2 --config " + q(w.cfg) + " --features " + q(w.cache) +
                       " --out " + q(scale),
                   w.log) == 0);
  const auto s = slurp(scale / "ablation.csv");
  CHECK(line_count(s) == 3);
  CHECK(s.find("scale,multi_scale,") != std::string::npos);
  CHECK(s.find("scale,max_scale,") != std::string::npos);

  REQUIRE(gmtc_run("ablate --study gating --params-only --config " + q(w.cfg) + " --features " + q(w.cache) +
                       " --out " + q(w.dir / "ab_g"),
                   w.log) == 0);
  CHECK(line_count(slurp(w.dir / "ab_g" / "ablation.csv")) == 5);
  REQUIRE(gmtc_run("ablate --study gscb --params-only --features " + q(w.cache) + " --out " + q(w.dir / "ab_j"), w.log) ==
          0);
  CHECK(line_count(slurp(w.dir / "ab_j" / "ablation.csv")) == 6);

  CHECK(gmtc_run("ablate --study width --features " + q(w.cache) + " --out " + q(w.dir / "ab_x"), w.log) == 1);
}

TEST_CASE("analyze emits maps, entropy and projections", "[cli][analyze]") {
  auto& w = ws();
  const auto tr = w.dir / "ho";
  REQUIRE(gmtc_run("train --features " + q(w.cache) + " --seed 1 --config " + q(w.cfg) + " --out " + q(tr), w.log) == 0);
  const auto ck = tr / "fold_0" / "checkpoint.gmck";
  const std::string common = " --ckpt " + q(ck) + " --features " + q(w.cache);

  REQUIRE(gmtc_run("analyze maps" + common + " --limit 3 --out " + q(w.dir / "maps"), w.log) == 0);
  CHECK(count_files(w.dir / "maps", ".pgm") == 3 * (2 + 2));
  CHECK(count_files(w.dir / "maps" / "maps" / "angry_000", ".pgm") == 4);

  REQUIRE(gmtc_run("analyze entropy" + common + " --out " + q(w.dir / "ent"), w.log) == 0);
  const auto ent = slurp(w.dir / "ent" / "entropy.csv");
  CHECK(ent.rfind("corpus,emotion,entropy_bits\n", 0) == 0);
  CHECK(line_count(ent) == 1 + 6);
  CHECK(line_count(slurp(w.dir / "ent" / "entropy_per_clip.csv")) == 1 + 60);

  const auto p1 = w.dir / "proj1", p2 = w.dir / "proj2";
  REQUIRE(gmtc_run("analyze project" + common + " --ae-epochs 20 --seed 3 --out " + q(p1), w.log) == 0);
  REQUIRE(gmtc_run("analyze project" + common + " --ae-epochs 20 --seed 3 --out " + q(p2), w.log) == 0);
  const auto proj = slurp(p1 / "projection.csv");
  CHECK(proj.rfind("id,label,x,y\n", 0) == 0);
  CHECK(line_count(proj) == 1 + 60);
  CHECK(proj == slurp(p2 / "projection.csv"));

  // A cache padded to another length does not fit the checkpoint.
  const auto other = w.dir / "other.gmtc";
  REQUIRE(gmtc_run("features --corpus " + q(w.corpus / "manifest.csv") + " --root " + q(w.corpus) + " --out " +
                       q(other) + " --tmax 40",
                   w.log) == 0);
  CHECK(gmtc_run("analyze entropy --ckpt " + q(ck) + " --features " + q(other) + " --out " + q(w.dir / "bad"), w.log) ==
        2);
  CHECK(w.run_log().find("mismatch") != std::string::npos);
  CHECK(gmtc_run("analyze pictures" + common + " --out " + q(w.dir / "bad2"), w.log) == 1);
}

TEST_CASE("top-level usage", "[cli]") {
  auto& w = ws();
  CHECK(gmtc_run("--help", w.log) == 0);
  CHECK(gmtc_run("", w.log) == 1);
  CHECK(gmtc_run("frobnicate", w.log) == 1);
}
