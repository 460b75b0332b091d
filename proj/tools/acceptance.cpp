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

// Acceptance run: one PASS/FAIL line per criterion. Criterion 10 needs a
// user-supplied EMODB tree and never affects the exit status.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "gmtc/gmtc.hpp"
#include "gmtc/gradcheck.hpp"

#ifndef GMTC_CLI_PATH
#define GMTC_CLI_PATH "gmtc"
#endif

namespace fs = std::filesystem;
using namespace gmtc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

// ---- 1 --------------------------------------------------------------------------

Outcome structural() {
  struct Row {
    const char* name;
    DrdScheme scheme;
    std::size_t n_gcb;
    std::size_t expected;
  };
  const Row rows[] = {{"ours-256", DrdScheme::ours, 7, 260604},
                      {"ours-128", DrdScheme::ours, 6, 223632},
                      {"raw-128", DrdScheme::raw, 7, 260604},
                      {"raw-256", DrdScheme::raw, 8, 297576}};
  Outcome o{true, ""};
  for (const auto& r : rows) {
    ModelConfig c;
    c.drd_scheme = r.scheme;
    c.n_gcb = r.n_gcb;
    c.n_classes = 6;
    const std::size_t closed = param_count(c), allocated = ParamStore<float>(c).scalar_count();
    const bool ok = closed == r.expected && allocated == r.expected;
    o.pass = o.pass && ok;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + r.name + " " + std::to_string(closed) + "/" +
                std::to_string(allocated) + " (" + num(static_cast<double>(closed) / 1e6, 3) + "M)";
  }
  return o;
}

// ---- 2 --------------------------------------------------------------------------

Outcome causality() {
  Rng rng(23);
  std::size_t violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ModelConfig cfg;
    cfg.n_gcb = pick(rng, 1, 4);
    cfg.gating_levels = pick(rng, 1, 3);
    cfg.n_gscb = pick(rng, 1, 3);
    cfg.n_classes = pick(rng, 2, 6);
    cfg.seq_len = pick(rng, 8, 48);
    cfg.drd_scheme = rng() % 2 ? DrdScheme::raw : DrdScheme::ours;
    cfg.skip_mode = rng() % 2 ? SkipMode::max_scale : SkipMode::multi_scale;
    const auto p = ParamStore<float>::xavier(cfg, 500 + trial);
    auto x = random_tensor<float>(Shape{cfg.seq_len, cfg.channels}, rng);
    const std::size_t t = rng() % cfg.seq_len;
    const auto a = forward_pass(x, cfg, p);
    for (std::size_t c = 0; c < cfg.channels; ++c) x(t, c) += static_cast<float>(uniform(rng, 0.5, 3.0));
    const auto b = forward_pass(x, cfg, p);
    for (std::size_t blk = 0; blk < cfg.n_gcb; ++blk)
      for (std::size_t i = 0; i < t * cfg.channels; ++i)
        violations += a.block_output(blk)[i] != b.block_output(blk)[i];
  }
  return {violations == 0, "50 configs, " + std::to_string(violations) + " changed values before the perturbed frame"};
}

// ---- 3 --------------------------------------------------------------------------

Outcome gradients() {
  Rng rng(2);
  double ops = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nt = pick(rng, 1, 12), ci = pick(rng, 1, 4), co = pick(rng, 1, 4), k = pick(rng, 1, 3);
    const std::size_t d = std::size_t{1} << pick(rng, 0, 2);
    const Shape xs = trial % 2 ? Shape{pick(rng, 1, 3), nt, ci} : Shape{nt, ci};
    auto x = random_tensor<double>(xs, rng);
    auto kernel = random_tensor<double>(Shape{co, ci, k}, rng);
    auto bias = random_tensor<double>(Shape{co}, rng);
    const auto r = random_tensor<double>(conv1d_causal(x, kernel, bias, d).shape(), rng);
    const auto loss = [&] { return weighted_sum(conv1d_causal(x, kernel, bias, d), r); };
    const auto g = conv1d_causal_backward(x, kernel, bias, d, r);
    ops = std::max({ops, fd_max_rel_error(x, g.input, loss), fd_max_rel_error(kernel, g.kernel, loss),
                    fd_max_rel_error(bias, g.bias, loss)});
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{pick(rng, 1, 4), pick(rng, 1, 6)};
    auto x = random_tensor<double>(shape, rng, -4, 4);
    avoid_kinks(x);
    const auto r = random_tensor<double>(shape, rng);
    ops = std::max(ops, fd_max_rel_error(x, relu_backward(x, r), [&] { return weighted_sum(relu(x), r); }));
    ops = std::max(ops, fd_max_rel_error(x, sigmoid_backward(x, r), [&] { return weighted_sum(sigmoid(x), r); }));
    ops = std::max(ops, fd_max_rel_error(x, leaky_relu_backward(x, r, 0.05),
                                         [&] { return weighted_sum(leaky_relu(x, 0.05), r); }));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nb = pick(rng, 1, 3), nt = pick(rng, 1, 8), nc = pick(rng, 1, 4);
    auto x = random_tensor<double>(Shape{nb, nt, nc}, rng);
    const auto r = random_tensor<double>(Shape{nb, nc}, rng);
    ops = std::max(ops, fd_max_rel_error(x, avg_pool_backward(x.shape(), r),
                                         [&] { return weighted_sum(global_avg_pool(x), r); }));
    std::vector<std::size_t> lengths(nb);
    for (auto& l : lengths) l = pick(rng, 1, nt);
    ops = std::max(ops, fd_max_rel_error(x, avg_pool_backward(x.shape(), r, lengths),
                                         [&] { return weighted_sum(masked_avg_pool(x, lengths), r); }));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = pick(rng, 1, 5), c = pick(rng, 1, 6);
    auto x = random_tensor<double>(Shape{pick(rng, 1, 4), c}, rng);
    auto w = random_tensor<double>(Shape{k, c}, rng);
    auto b = random_tensor<double>(Shape{k}, rng);
    const auto r = random_tensor<double>(dense(x, w, b).shape(), rng);
    const auto loss = [&] { return weighted_sum(dense(x, w, b), r); };
    const auto g = dense_backward(x, w, r);
    ops = std::max({ops, fd_max_rel_error(x, g.input, loss), fd_max_rel_error(w, g.weight, loss),
                    fd_max_rel_error(b, g.bias, loss)});
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = pick(rng, 1, 8);
    auto z = random_tensor<double>(Shape{k}, rng, -3, 3);
    const std::size_t label = pick(rng, 0, k - 1);
    const auto g = softmax_cross_entropy_grad(softmax(z), label);
    ops = std::max(ops, fd_max_rel_error(z, g, [&] { return cross_entropy(softmax(z), label); }));
  }

  ModelConfig cfg;
  cfg.n_gcb = 2;
  cfg.gating_levels = 2;
  cfg.n_gscb = 1;
  cfg.n_classes = 3;
  cfg.seq_len = 16;
  ParamStore<double> p(cfg);
  Rng prng(41);
  for (auto& t : p.tensors())
    for (auto& v : t.values()) v = uniform(prng, -0.4, 0.4);
  auto x = random_tensor<double>(Shape{2, 16, cfg.channels}, rng);
  const auto r = random_tensor<double>(Shape{2, 3}, rng);
  const auto fp = forward_pass(x, cfg, p, {}, true);
  Tensor<double> gx;
  const auto grads = backward(fp, r, cfg, p, &gx);
  const auto loss = [&] { return weighted_sum(forward_pass(x, cfg, p).logits, r); };
  double model = fd_max_rel_error(x, gx, loss);
  for (std::size_t i = 0; i < p.size(); ++i) model = std::max(model, fd_max_rel_error(p[i], grads[i], loss));

  return {ops < 1e-4 && model < 1e-3,
          "max rel. error ops " + num(ops, 3) + " (< 1e-4), full model " + num(model, 3) + " (< 1e-3)"};
}

// ---- 4 --------------------------------------------------------------------------

Outcome metric_oracle() {
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = pick(rng, 2, 8), n = pick(rng, 1, 80);
    std::vector<std::size_t> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng() % k;
      pred[i] = rng() % 3 == 0 ? truth[i] : rng() % k;
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    const auto rep = compute_report(truth, pred, names);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += truth[i] == pred[i];
    double recall_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t total = 0, right = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (truth[i] == c) {
          ++total;
          right += pred[i] == c;
        }
      if (total) {
        recall_sum += static_cast<double>(right) / static_cast<double>(total);
        ++present;
      }
    }
    mismatches += rep.war != static_cast<double>(hits) / static_cast<double>(n);
    mismatches += rep.uar != recall_sum / static_cast<double>(present);
  }
  const auto hand = compute_report({0, 0, 0, 1}, {0, 0, 0, 0}, {"A", "B"});
  const bool hand_ok = hand.war == 0.75 && hand.uar == 0.5;
  return {mismatches == 0 && hand_ok, "1000 random cases, " + std::to_string(mismatches) +
                                          " mismatches; hand case WAR " + num(hand.war) + " UAR " + num(hand.uar)};
}

// ---- shared synthetic data --------------------------------------------------------

Dataset synthetic_dataset(const fs::path& dir, std::uint64_t seed) {
  SynthOptions opt;
  opt.seed = seed;
  opt.per_class = 10;
  const auto m = synth_generate(dir, opt);
  auto ex = extract_features(dir, m, std::nullopt, thread_budget());
  if (!ex.failures.empty()) throw DataError("synthetic feature extraction failed: " + ex.failures.front());
  return make_dataset(ex.features, ex.manifest);
}

ModelConfig smoke_config(const Dataset& ds) {
  ModelConfig cfg;
  cfg.n_gcb = 4;
  cfg.channels = ds.channels();
  cfg.seq_len = ds.seq_len();
  cfg.n_classes = ds.label_set.size();
  return cfg;
}

// ---- 5 --------------------------------------------------------------------------

Outcome overfit(const Dataset& ds) {
  const auto plan = make_splits(ds.labels, ds.label_set.size(), SplitScheme::holdout_80_20, 1);
  const auto& split = plan.folds.front();
  const auto cfg = smoke_config(ds);
  TrainConfig tc;
  tc.max_epochs = 300;
  tc.patience = 300;
  tc.seed = 1;
  tc.stop_on_perfect_train = true;
  // Selection sees only the training part; the held-out part is scored once at the end.
  const auto run = train(ds, Fold{split.train, {}}, cfg, tc);
  const double train_war = run.best_val_war;
  const double held_out = evaluate(cfg, run.params, ds, split.test).war;
  const double baseline = nearest_centroid_accuracy(ds.features, ds.labels, ds.label_set.size(), split);
  return {train_war == 1.0 && held_out > baseline,
          "train WAR " + num(train_war) + " at epoch " + std::to_string(run.best_epoch) + " (of max 300); held-out WAR " +
              num(held_out, 4) + " vs nearest-centroid " + num(baseline, 4)};
}

// ---- 6 --------------------------------------------------------------------------

Outcome entropy_oracle() {
  const GrayImage flat{5, 4, std::vector<std::uint8_t>(20, 130)};
  const GrayImage checker{2, 2, {0, 255, 255, 0}};
  const double e_flat = entropy_2d(flat), e_checker = entropy_2d(checker);
  Rng rng(32);
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    GrayImage img{pick(rng, 2, 30), pick(rng, 2, 30), {}};
    img.pixels.resize(img.width * img.height);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    bad += std::abs(entropy_2d(img) - entropy_2d(img.transposed())) > 1e-12;
  }
  return {e_flat == 0.0 && std::abs(e_checker - 1.0) < 1e-12 && bad == 0,
          "constant " + num(e_flat) + " bits, checkerboard " + num(e_checker) + " bits, transposition mismatches " +
              std::to_string(bad) + "/100"};
}

// ---- 7 --------------------------------------------------------------------------

Outcome multi_scale(const Dataset& ds) {
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto plan = make_splits(ds.labels, ds.label_set.size(), SplitScheme::holdout_80_20, seed);
    TrainConfig tc;
    tc.max_epochs = 100;
    tc.patience = 30;
    tc.seed = seed;
    double val[2];
    for (int m = 0; m < 2; ++m) {
      auto cfg = smoke_config(ds);
      cfg.skip_mode = m == 0 ? SkipMode::multi_scale : SkipMode::max_scale;
      val[m] = train(ds, plan.folds.front(), cfg, tc).best_val_war;
    }
    wins += val[0] >= val[1];
    detail += (detail.empty() ? "" : "; ") + ("seed " + std::to_string(seed) + " multi " + num(val[0], 3) + " max " +
                                             num(val[1], 3));
    std::cerr << "  multi-scale seed " << seed << ": multi " << val[0] << ", max " << val[1] << '\n';
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds multi >= max (" + detail + ")"};
}

// ---- 8 --------------------------------------------------------------------------

Outcome mfcc_pipeline() {
  AudioClip clip;
  clip.sample_rate = 22050;
  Rng rng(8);
  clip.samples.resize(22050);
  for (auto& s : clip.samples) s = static_cast<float>(0.1 * gaussian(rng));
  const auto fm = mfcc_39(clip);
  const auto w = hamming_window(1102);
  const double mel = hz_to_mel(700.0), mel_ref = 2595.0 * std::log10(2.0);
  const auto flat = dct2_ortho(std::vector<double>(128, 2.0), 13);
  double leak = 0.0;
  for (std::size_t k = 1; k < flat.size(); ++k) leak = std::max(leak, std::abs(flat[k]));
  const bool ok = fm.true_len == 77 && fm.channels() == 39 && std::abs(w.front() - 0.08) < 1e-4 &&
                  std::abs(w.back() - 0.08) < 1e-4 && std::abs(mel - mel_ref) < 1e-4 &&
                  std::abs(flat[0] - 2.0 * std::sqrt(128.0)) < 1e-4 && leak < 1e-4;
  return {ok, std::to_string(fm.true_len) + " frames x " + std::to_string(fm.channels()) + "; hamming[0] " +
                  num(w.front(), 8) + "; mel(700) " + num(mel, 8) + " (~781.17); flat-spectrum DCT max |c_k>0| " +
                  num(leak, 3)};
}

// ---- 9 --------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("'") + GMTC_CLI_PATH + "' " + args + " >> '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.size() >= 17 && name.compare(name.size() - 17, 17, "run_manifest.json") == 0) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    // Training histories carry per-epoch wall-clock time; everything else is compared byte for byte.
    if (name == "history.csv") bytes = strip_seconds(bytes);
    files[fs::relative(e.path(), dir).string()] = std::move(bytes);
  }
  return files;
}

Outcome determinism(const fs::path& work) {
  const fs::path log = work / "cli.log";
  std::map<std::string, std::string> snaps[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = work / ("rep" + std::to_string(rep));
    fs::remove_all(d);
    fs::create_directories(d);
    {
      std::ofstream cfg(d / "model.cfg");
      cfg << "n_gcb=3\nn_gscb=2\nmax_epochs=8\npatience=8\nbatch_size=16\n";
    }
    auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    const std::string feats = q(d / "feats.gmtc"), ckpt = q(d / "train" / "fold_0" / "checkpoint.gmck");
    const std::vector<std::string> steps = {
        "synth --seed 9 --per-class 6 --out " + q(d / "corpus"),
        "features --corpus " + q(d / "corpus" / "manifest.csv") + " --root " + q(d / "corpus") + " --out " + feats,
        "train --features " + feats + " --split holdout --seed 4 --config " + q(d / "model.cfg") + " --out " +
            q(d / "train"),
        "train --features " + feats + " --split cv5 --seed 4 --config " + q(d / "model.cfg") + " --out " + q(d / "cv"),
        "ablate --study scale --max-epochs 2 --seed 4 --config " + q(d / "model.cfg") + " --features " + feats +
            " --out " + q(d / "ablate"),
        "analyze entropy --ckpt " + ckpt + " --features " + feats + " --out " + q(d / "entropy"),
        "analyze maps --limit 2 --ckpt " + ckpt + " --features " + feats + " --out " + q(d / "maps"),
        "analyze project --ae-epochs 40 --seed 2 --ckpt " + ckpt + " --features " + feats + " --out " + q(d / "proj")};
    for (const auto& s : steps)
      if (const int rc = run_cli(s, log); rc != 0)
        return {false, "'gmtc " + s.substr(0, s.find(' ')) + "' exited " + std::to_string(rc) + "; see " + log.string()};
    snaps[rep] = snapshot(d);
  }
  std::size_t differing = 0;
  std::string first;
  std::set<std::string> names;
  for (const auto& [k, v] : snaps[0]) names.insert(k);
  for (const auto& [k, v] : snaps[1]) names.insert(k);
  std::size_t checkpoints = 0, caches = 0, reports = 0;
  for (const auto& n : names) {
    const auto a = snaps[0].find(n), b = snaps[1].find(n);
    if (a == snaps[0].end() || b == snaps[1].end() || a->second != b->second) {
      ++differing;
      if (first.empty()) first = n;
    }
    checkpoints += n.ends_with(".gmck");
    caches += n.ends_with(".gmtc");
    reports += n.ends_with("report.json") || n.ends_with("summary.json") || n.ends_with(".csv");
  }
  return {differing == 0 && checkpoints > 0 && caches > 0,
          std::to_string(names.size()) + " artifacts (" + std::to_string(caches) + " caches, " +
              std::to_string(checkpoints) + " checkpoints, " + std::to_string(reports) + " CSV/JSON reports), " +
              std::to_string(differing) + " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

// ---- 10 -------------------------------------------------------------------------

Outcome emodb_soft(const fs::path& root) {
  const auto m = scan_corpus(root, CorpusKind::emodb);
  const auto ex = extract_features(root, m, std::nullopt, thread_budget());
  const auto ds = make_dataset(ex.features, ex.manifest);
  ModelConfig cfg;
  cfg.channels = ds.channels();
  cfg.seq_len = ds.seq_len();
  cfg.n_classes = ds.label_set.size();
  const auto plan = make_splits(ds.labels, ds.label_set.size(), SplitScheme::cv10, 0);
  const auto cv = run_cv(ds, plan, cfg, TrainConfig{});
  const double mean = 100.0 * cv.war.mean;
  return {std::abs(mean - 91.06) <= 10.0, "10-fold WAR " + num(mean, 4) + " +- " + num(100.0 * cv.war.std, 3) +
                                              " vs reference 91.06 (window +-10)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmtc acceptance criteria"};
  std::string workdir = (fs::temp_directory_path() / "gmtc_acceptance").string();
  std::string only;
  std::string emodb;
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--only", only, "Comma-separated criterion numbers to run");
  app.add_option("--emodb-root", emodb, "EMODB root for the optional criterion 10 (or GMTC_EMODB_ROOT)");
  CLI11_PARSE(app, argc, argv);
  if (emodb.empty())
    if (const char* env = std::getenv("GMTC_EMODB_ROOT")) emodb = env;

  std::set<int> selected;
  for (std::stringstream ss(only); ss.good();) {
    std::string tok;
    std::getline(ss, tok, ',');
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  auto wanted = [&](int id) { return selected.empty() || selected.count(id); };

  const fs::path work(workdir);
  fs::create_directories(work);
  std::optional<Dataset> synthetic;
  auto data = [&]() -> const Dataset& {
    if (!synthetic) synthetic = synthetic_dataset(work / "synthetic", 1);
    return *synthetic;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"structural oracle", structural},
      {"causality", causality},
      {"gradients", gradients},
      {"metric oracle", metric_oracle},
      {"overfit smoke", [&] { return overfit(data()); }},
      {"entropy oracle", entropy_oracle},
      {"multi-scale property", [&] { return multi_scale(data()); }},
      {"mfcc pipeline", mfcc_pipeline},
      {"determinism", [&] { return determinism(work / "determinism"); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!wanted(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << " ["
              << num(secs, 3) << " s]" << std::endl;
    failed += !o.pass;
  }

  if (wanted(10)) {
    if (emodb.empty()) {
      std::cout << "SKIP 10 emodb 10-fold (soft): no EMODB root given (--emodb-root or GMTC_EMODB_ROOT)" << std::endl;
    } else {
      Outcome o;
      try {
        o = emodb_soft(emodb);
      } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
      }
      std::cout << (o.pass ? "SOFT-PASS" : "SOFT-FAIL") << " 10 emodb 10-fold: " << o.detail << std::endl;
    }
  }
  return failed == 0 ? 0 : 1;
}
