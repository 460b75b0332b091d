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

// gmtc: features, training, ablations, analysis and synthetic data.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gmtc/gmtc.hpp"

#ifndef GMTC_GIT_DESCRIBE
#define GMTC_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gmtc;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "[gmtc] " << msg << '\n'; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed for " + path.string());
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects what a run produced and writes run_manifest.json at the end.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void config(std::string text) { config_ = std::move(text); }
  void seed(std::uint64_t s) { seed_ = s; }
  void artifact(const fs::path& p) { artifacts_.push_back(p.string()); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config"] = config_;
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    j["artifacts"] = artifacts_;
    j["started_at"] = started_;
    j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    j["git_describe"] = GMTC_GIT_DESCRIBE;
    j["threads"] = thread_budget();
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    write_text(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  std::string config_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> artifacts_;
  json extra_ = json::object();
};

fs::path sidecar_manifest(const fs::path& cache) { return fs::path(cache.string() + ".manifest.csv"); }

Dataset load_dataset(const fs::path& cache) {
  if (!fs::exists(cache)) throw DataError("feature cache not found: " + cache.string());
  const auto side = sidecar_manifest(cache);
  if (!fs::exists(side)) throw DataError("sidecar manifest not found: " + side.string());
  return make_dataset(cache_read(cache), load_manifest_csv(side));
}

// ---- configuration -----------------------------------------------------------

/// Model and training settings from an optional key=value file. Data-derived
/// keys (channels, seq_len, n_classes) default to the cache's shape.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  std::string canonical() const {
    KeyValues kv = model.to_kv();
    const KeyValues tk = train.to_kv();
    for (const auto& [k, v] : tk.entries()) kv.set(k, v);
    return kv.canonical();
  }
};

RunConfig load_run_config(const std::string& path, const Dataset& ds, std::uint64_t seed) {
  KeyValues kv;
  if (!path.empty()) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    kv = KeyValues::load(path);
  }
  const KeyValues model_kv = ModelConfig().to_kv(), train_kv = TrainConfig().to_kv();
  const auto& model_keys = model_kv.entries();
  const auto& train_keys = train_kv.entries();
  for (const auto& [k, v] : kv.entries())
    if (!model_keys.count(k) && !train_keys.count(k)) throw UsageError("config: unknown key '" + k + "'");
  if (kv.has("seed")) throw UsageError("config: pass the seed with --seed, not in the config file");

  ModelConfig base;
  base.channels = ds.channels();
  base.seq_len = ds.seq_len();
  base.n_classes = ds.label_set.size();
  RunConfig rc;
  try {
    rc.model = ModelConfig::from_kv(kv, base);
    rc.train = TrainConfig::from_kv(kv);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  rc.train.seed = seed;
  return rc;
}

// ---- training helpers --------------------------------------------------------

struct FoldOutcome {
  TrainResult run;
  EvalReport report;
};

EpochCallback progress(std::size_t fold, bool verbose) {
  if (!verbose) return {};
  return [fold](const EpochRecord& r) {
    std::ostringstream os;
    os.precision(4);
    os << "fold " << fold << " epoch " << r.epoch << " loss " << r.train_loss << " train_war " << r.train_war
       << " val_war " << r.val_war << " (" << r.seconds << " s)";
    log(os.str());
  };
}

FoldOutcome run_fold(const Dataset& ds, const Fold& fold, const RunConfig& rc, std::size_t index, bool verbose) {
  auto run = train(ds, fold, rc.model, rc.train, nullptr, progress(index, verbose));
  auto report = evaluate(rc.model, run.params, ds, fold.test);
  std::ostringstream os;
  os << "fold " << index << ": best epoch " << run.best_epoch << " of " << run.history.size() << ", test WAR "
     << report.war << ", UAR " << report.uar;
  log(os.str());
  for (const auto& w : report.warnings) log("warning: " + w);
  return {std::move(run), std::move(report)};
}

SplitPlan plan_for(const Dataset& ds, const std::string& scheme, std::uint64_t seed) {
  SplitScheme s;
  try {
    s = parse_split_scheme(scheme);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  try {
    return make_splits(ds.labels, ds.label_set.size(), s, seed);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

json stat_json(const SummaryStat& s) { return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}}; }

// ---- subcommands -------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 1;
  std::string out;
  std::size_t per_class = 10;
  std::size_t classes = 6;
};

int cmd_synth(const SynthArgs& a, RunRecord& rec) {
  SynthOptions opt;
  opt.seed = a.seed;
  opt.per_class = a.per_class;
  opt.classes = a.classes;
  const auto m = synth_generate(a.out, opt);
  rec.seed(a.seed);
  for (const auto& e : m.entries) rec.artifact(fs::path(a.out) / e.path);
  rec.artifact(fs::path(a.out) / "manifest.csv");
  rec.write(fs::path(a.out) / "run_manifest.json");
  log("wrote " + std::to_string(m.entries.size()) + " clips to " + a.out);
  return 0;
}

struct FeaturesArgs {
  std::string corpus;
  std::string root;
  std::string out;
  std::optional<std::size_t> tmax;
  bool normalize = false;
};

int cmd_features(const FeaturesArgs& a, RunRecord& rec) {
  if (!fs::is_directory(a.root)) throw DataError("corpus root is not a directory: " + a.root);
  Manifest manifest;
  if (a.corpus.size() > 4 && detail::lower(a.corpus.substr(a.corpus.size() - 4)) == ".csv") {
    manifest = load_manifest_csv(a.corpus);
  } else {
    CorpusKind kind;
    try {
      kind = parse_corpus_kind(a.corpus);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    manifest = scan_corpus(a.root, kind);
    if (!manifest.rejects.empty())
      log(std::to_string(manifest.rejects.size()) + " files skipped: no emotion code in the name");
  }
  if (manifest.entries.empty()) throw DataError("no labelled audio found under " + a.root);

  const unsigned threads = thread_budget();
  log("extracting " + std::to_string(manifest.entries.size()) + " files on " + std::to_string(threads) + " threads");
  auto res = extract_features(a.root, manifest, a.tmax, threads);
  if (a.normalize)
    for (auto& fm : res.features) normalize_utterance(fm);
  for (const auto& f : res.failures) log("failed: " + f);
  if (res.features.empty()) throw DataError("every file failed feature extraction");
  if (res.truncated) log(std::to_string(res.truncated) + " clips truncated to " + std::to_string(res.t_max) + " frames");

  const fs::path cache(a.out);
  if (cache.has_parent_path()) fs::create_directories(cache.parent_path());
  cache_write(cache, res.features);
  save_manifest_csv(sidecar_manifest(cache), res.manifest);
  rec.artifact(cache);
  rec.artifact(sidecar_manifest(cache));
  rec.note("t_max", res.t_max);
  rec.note("normalized", a.normalize);
  rec.note("clips", res.features.size());
  rec.note("failures", res.failures);
  rec.write(cache.string() + ".run_manifest.json");
  log("wrote " + std::to_string(res.features.size()) + " feature maps (T = " + std::to_string(res.t_max) + ") to " +
      a.out);

  const std::size_t total = manifest.entries.size();
  if (res.failures.size() * 100 > total) {
    log(std::to_string(res.failures.size()) + " of " + std::to_string(total) + " files failed (more than 1%)");
    return 2;
  }
  return 0;
}

struct TrainArgs {
  std::string features;
  std::string split = "holdout";
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  bool verbose = false;
};

int cmd_train(const TrainArgs& a, RunRecord& rec) {
  const auto ds = load_dataset(a.features);
  const auto rc = load_run_config(a.config, ds, a.seed);
  const auto plan = plan_for(ds, a.split, a.seed);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config.txt", rc.canonical());
  rec.config(rc.canonical());
  rec.seed(a.seed);
  rec.artifact(out / "config.txt");

  {
    std::ostringstream os;
    os << "fold,role,clip_id\n";
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      for (auto i : plan.folds[f].train) os << f << ",train," << detail::csv_field(ds.features[i].clip_id) << '\n';
      for (auto i : plan.folds[f].test) os << f << ",test," << detail::csv_field(ds.features[i].clip_id) << '\n';
    }
    write_text(out / "splits.csv", os.str());
    rec.artifact(out / "splits.csv");
  }

  log("training " + std::to_string(param_count(rc.model)) + " parameters on " + std::to_string(ds.size()) +
      " clips, split " + to_string(plan.scheme) + ", " + std::to_string(plan.folds.size()) + " fold(s)");
  CvResult cv;
  std::vector<double> wars, uars;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    auto [run, report] = run_fold(ds, plan.folds[f], rc, f, a.verbose);
    const fs::path dir = out / ("fold_" + std::to_string(f));
    fs::create_directories(dir);
    KeyValues meta;
    meta.set("fold", f);
    meta.set("split", to_string(plan.scheme));
    meta.set("seed", static_cast<std::size_t>(a.seed));
    meta.set("best_epoch", run.best_epoch);
    meta.set("best_val_war", run.best_val_war);
    std::string labels;
    for (const auto& l : ds.label_set) labels += (labels.empty() ? "" : ",") + l;
    meta.set("label_set", labels);
    checkpoint_save(dir / "checkpoint.gmck", rc.model, run.params, meta);
    write_text(dir / "history.csv", history_csv(run.history));
    write_text(dir / "report.json", report.to_json().dump(2) + "\n");
    write_text(dir / "confusion.csv", report.confusion_csv());
    for (const char* name : {"checkpoint.gmck", "history.csv", "report.json", "confusion.csv"}) rec.artifact(dir / name);
    wars.push_back(report.war);
    uars.push_back(report.uar);
    cv.runs.push_back(std::move(run));
    cv.reports.push_back(std::move(report));
  }
  cv.war = summarize(wars);
  cv.uar = summarize(uars);
  auto summary = cv.summary_json();
  summary["split"] = to_string(plan.scheme);
  summary["seed"] = a.seed;
  summary["param_count"] = param_count(rc.model);
  summary["label_set"] = ds.label_set;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  rec.artifact(out / "summary.json");
  rec.write(out / "run_manifest.json");
  std::ostringstream os;
  os << "WAR mean " << cv.war.mean << " std " << cv.war.std << " max " << cv.war.max << "; UAR mean " << cv.uar.mean;
  log(os.str());
  return 0;
}

struct AblateArgs {
  std::string study;
  std::string features;
  std::string split = "holdout";
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
  bool params_only = false;
  bool verbose = false;
};

std::vector<std::pair<std::string, ModelConfig>> study_variants(const std::string& study, const ModelConfig& base) {
  std::vector<std::pair<std::string, ModelConfig>> v;
  if (study == "gating") {
    for (std::size_t l = 1; l <= 4; ++l) {
      auto c = base;
      c.gating_levels = l;
      v.emplace_back("L=" + std::to_string(l), c);
    }
  } else if (study == "gscb") {
    for (std::size_t j = 1; j <= 5; ++j) {
      auto c = base;
      c.n_gscb = j;
      v.emplace_back("J=" + std::to_string(j), c);
    }
  } else if (study == "scale") {
    for (auto mode : {SkipMode::multi_scale, SkipMode::max_scale}) {
      auto c = base;
      c.skip_mode = mode;
      v.emplace_back(to_string(mode), c);
    }
  } else if (study == "drd") {
    // Receptive-field pairs: "ours" doubles the second level, so one fewer block covers the same span.
    const std::tuple<const char*, DrdScheme, std::size_t> rows[] = {
        {"ours-256", DrdScheme::ours, 7}, {"ours-128", DrdScheme::ours, 6},
        {"raw-128", DrdScheme::raw, 7},   {"raw-256", DrdScheme::raw, 8}};
    for (const auto& [name, scheme, blocks] : rows) {
      auto c = base;
      c.drd_scheme = scheme;
      c.n_gcb = blocks;
      v.emplace_back(name, c);
    }
  } else {
    throw UsageError("unknown study '" + study + "' (gating|gscb|scale|drd)");
  }
  return v;
}

int cmd_ablate(const AblateArgs& a, RunRecord& rec) {
  const auto ds = load_dataset(a.features);
  auto rc = load_run_config(a.config, ds, a.seed);
  if (a.max_epochs) {
    rc.train.max_epochs = *a.max_epochs;
    rc.train.patience = std::min(rc.train.patience, rc.train.max_epochs);
  }
  if (a.patience) rc.train.patience = *a.patience;
  try {
    rc.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto variants = study_variants(a.study, rc.model);
  const auto plan = plan_for(ds, a.split, a.seed);
  const fs::path out(a.out);
  fs::create_directories(out);
  rec.config(rc.canonical());
  rec.seed(a.seed);

  std::ostringstream csv;
  csv << "study,variant,param_count,receptive_field_frames,war_mean,war_std,war_max,uar_mean,uar_std\n";
  json detail = json::array();
  for (const auto& [name, cfg] : variants) {
    const auto rf = receptive_field(cfg);
    csv << a.study << ',' << name << ',' << param_count(cfg) << ',' << rf.actual << ',';
    json row{{"variant", name}, {"param_count", param_count(cfg)}, {"config", cfg.canonical_text()}};
    if (a.params_only) {
      csv << ",,,,\n";
      detail.push_back(row);
      continue;
    }
    RunConfig vrc{cfg, rc.train};
    std::vector<double> wars, uars;
    json folds = json::array();
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      log(a.study + " " + name + ":");
      const auto outcome = run_fold(ds, plan.folds[f], vrc, f, a.verbose);
      wars.push_back(outcome.report.war);
      uars.push_back(outcome.report.uar);
      folds.push_back({{"fold", f},
                       {"war", outcome.report.war},
                       {"uar", outcome.report.uar},
                       {"best_epoch", outcome.run.best_epoch},
                       {"best_val_war", outcome.run.best_val_war}});
    }
    const auto w = summarize(wars), u = summarize(uars);
    csv << fmt(w.mean) << ',' << fmt(w.std) << ',' << fmt(w.max) << ',' << fmt(u.mean) << ',' << fmt(u.std) << '\n';
    row["folds"] = folds;
    row["war"] = stat_json(w);
    row["uar"] = stat_json(u);
    detail.push_back(row);
  }
  write_text(out / "ablation.csv", csv.str());
  write_text(out / "ablation.json",
             json{{"study", a.study}, {"split", a.split}, {"seed", a.seed}, {"variants", detail}}.dump(2) + "\n");
  rec.artifact(out / "ablation.csv");
  rec.artifact(out / "ablation.json");
  rec.write(out / "run_manifest.json");
  log("wrote " + (out / "ablation.csv").string());
  return 0;
}

struct AnalyzeArgs {
  std::string mode;
  std::string ckpt;
  std::string features;
  std::string out;
  std::string corpus_name = "corpus";
  std::optional<std::size_t> limit;
  std::uint64_t seed = 0;
  std::size_t ae_epochs = 400;
};

std::string clip_stem(const std::string& clip_id) {
  std::string s = fs::path(clip_id).replace_extension().string();
  for (auto& ch : s)
    if (ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  return s;
}

int cmd_analyze(const AnalyzeArgs& a, RunRecord& rec) {
  if (!fs::exists(a.ckpt)) throw DataError("checkpoint not found: " + a.ckpt);
  const auto ck = checkpoint_load(a.ckpt);
  const auto ds = load_dataset(a.features);
  const auto& cfg = ck.config;
  if (ds.seq_len() != cfg.seq_len || ds.channels() != cfg.channels || ds.label_set.size() != cfg.n_classes)
    throw DataError("checkpoint/cache mismatch: checkpoint expects " + std::to_string(cfg.seq_len) + " x " +
                    std::to_string(cfg.channels) + " with " + std::to_string(cfg.n_classes) + " classes, cache holds " +
                    std::to_string(ds.seq_len()) + " x " + std::to_string(ds.channels()) + " with " +
                    std::to_string(ds.label_set.size()));
  const auto manifest = load_manifest_csv(sidecar_manifest(a.features));
  const std::size_t n = a.limit ? std::min(*a.limit, ds.size()) : ds.size();
  const fs::path out(a.out);
  fs::create_directories(out);
  rec.config(cfg.canonical_text());
  const unsigned threads = thread_budget();

  auto corpus_of = [&](std::size_t i) {
    const auto& c = manifest.entries[i].corpus;
    return c.empty() ? a.corpus_name : c;
  };

  if (a.mode == "maps") {
    std::vector<std::vector<fs::path>> written(n);
    parallel_for(n, threads, [&](std::size_t i, unsigned) {
      const auto maps = export_feature_maps(cfg, ck.params, ds.features[i]);
      const fs::path dir = out / "maps" / clip_stem(ds.features[i].clip_id);
      fs::create_directories(dir);
      for (std::size_t k = 0; k < maps.size(); ++k) {
        const std::string base = std::to_string(k) + "_" + maps[k].source;
        write_pgm(dir / (base + ".pgm"), maps[k].image);
        write_text(dir / (base + ".csv"), map_csv(maps[k].values));
        written[i].push_back(dir / (base + ".pgm"));
        written[i].push_back(dir / (base + ".csv"));
      }
    });
    for (const auto& files : written)
      for (const auto& p : files) rec.artifact(p);
    log("exported " + std::to_string(cfg.n_gcb + 2) + " maps for each of " + std::to_string(n) + " clips");
  } else if (a.mode == "entropy") {
    std::vector<double> e(n);
    parallel_for(n, threads, [&](std::size_t i, unsigned) {
      const auto maps = export_feature_maps(cfg, ck.params, ds.features[i]);
      e[i] = entropy_2d(maps.back().image);
    });
    std::ostringstream per_clip;
    per_clip << "id,corpus,emotion,entropy_bits\n";
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& emotion = ds.label_set[ds.labels[i]];
      per_clip << detail::csv_field(ds.features[i].clip_id) << ',' << detail::csv_field(corpus_of(i)) << ',' << emotion << ','
               << fmt(e[i]) << '\n';
      auto& g = groups[{corpus_of(i), emotion}];
      g.first += e[i];
      ++g.second;
    }
    std::ostringstream table;
    table << "corpus,emotion,entropy_bits\n";
    for (const auto& [key, g] : groups)
      table << detail::csv_field(key.first) << ',' << key.second << ',' << fmt(g.first / static_cast<double>(g.second)) << '\n';
    write_text(out / "entropy.csv", table.str());
    write_text(out / "entropy_per_clip.csv", per_clip.str());
    rec.artifact(out / "entropy.csv");
    rec.artifact(out / "entropy_per_clip.csv");
    log("entropy over " + std::to_string(n) + " clips, " + std::to_string(groups.size()) + " groups");
  } else if (a.mode == "project") {
    Tensor<float> pooled(Shape{n, cfg.channels});
    parallel_for(n, threads, [&](std::size_t i, unsigned) {
      const auto v = pooled_features(cfg, ck.params, ds.features[i]);
      std::copy(v.begin(), v.end(), pooled.data() + i * cfg.channels);
    });
    AeOptions opt;
    opt.seed = a.seed;
    opt.epochs = a.ae_epochs;
    opt.input_width = cfg.channels;
    const auto ae = ae_train(pooled, opt);
    const auto xy = ae_project(ae, pooled);
    std::ostringstream os;
    os << "id,label,x,y\n";
    for (std::size_t i = 0; i < n; ++i)
      os << detail::csv_field(ds.features[i].clip_id) << ',' << ds.label_set[ds.labels[i]] << ',' << fmt(xy(i, 0)) << ','
         << fmt(xy(i, 1)) << '\n';
    write_text(out / "projection.csv", os.str());
    std::ostringstream loss;
    loss << "epoch,mse\n";
    for (std::size_t k = 0; k < ae.loss_history.size(); ++k) loss << k << ',' << fmt(ae.loss_history[k]) << '\n';
    write_text(out / "ae_loss.csv", loss.str());
    rec.seed(a.seed);
    rec.artifact(out / "projection.csv");
    rec.artifact(out / "ae_loss.csv");
    log("autoencoder MSE " + fmt(ae.loss_history.front()) + " -> " + fmt(ae.loss_history.back()));
  } else {
    throw UsageError("unknown analysis '" + a.mode + "' (entropy|maps|project)");
  }
  rec.write(out / "run_manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmtc: gated multi-scale temporal convolution for speech emotion recognition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GMTC_GIT_DESCRIBE);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic labelled corpus");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--per-class", synth.per_class, "Clips per class")->check(CLI::PositiveNumber);
  s->add_option("--classes", synth.classes, "Number of classes")->check(CLI::Range(2, 64));

  FeaturesArgs feat;
  auto* f = app.add_subcommand("features", "Extract MFCC features into a cache");
  f->add_option("--corpus", feat.corpus, "casia|emodb|ravdess|savee, or a manifest CSV")->required();
  f->add_option("--root", feat.root, "Corpus root directory")->required();
  f->add_option("--out", feat.out, "Cache file to write")->required();
  f->add_option("--tmax", feat.tmax, "Pad or truncate to this many frames")->check(CLI::PositiveNumber);
  f->add_flag("--normalize", feat.normalize, "Zero-mean, unit-variance columns per utterance");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train and evaluate on a split");
  t->add_option("--features", tr.features, "Feature cache")->required();
  t->add_option("--split", tr.split, "Split scheme")->check(CLI::IsMember({"holdout", "cv5", "cv10"}));
  t->add_option("--seed", tr.seed, "Seed for splits, initialization and shuffling");
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_flag("-v,--verbose", tr.verbose, "Log every epoch");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Sweep one architectural axis");
  b->add_option("--study", ab.study, "gating|gscb|scale|drd")->required();
  b->add_option("--features", ab.features, "Feature cache")->required();
  b->add_option("--split", ab.split, "Split scheme")->check(CLI::IsMember({"holdout", "cv5", "cv10"}));
  b->add_option("--seed", ab.seed, "Seed");
  b->add_option("--config", ab.config, "Base key=value config file");
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--max-epochs", ab.max_epochs, "Override max_epochs")->check(CLI::PositiveNumber);
  b->add_option("--patience", ab.patience, "Override patience");
  b->add_flag("--params-only", ab.params_only, "List variants and parameter counts without training");
  b->add_flag("-v,--verbose", ab.verbose, "Log every epoch");

  AnalyzeArgs an;
  auto* z = app.add_subcommand("analyze", "Feature maps, 2-D entropy or autoencoder projection");
  z->add_option("mode", an.mode, "entropy|maps|project")->required();
  z->add_option("--ckpt", an.ckpt, "Checkpoint")->required();
  z->add_option("--features", an.features, "Feature cache")->required();
  z->add_option("--out", an.out, "Output directory")->required();
  z->add_option("--corpus-name", an.corpus_name, "Corpus column when the manifest has none");
  z->add_option("--limit", an.limit, "Only the first N clips");
  z->add_option("--seed", an.seed, "Autoencoder seed");
  z->add_option("--ae-epochs", an.ae_epochs, "Autoencoder epochs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    if (s->parsed()) {
      RunRecord rec("synth", args);
      return cmd_synth(synth, rec);
    }
    if (f->parsed()) {
      RunRecord rec("features", args);
      return cmd_features(feat, rec);
    }
    if (t->parsed()) {
      RunRecord rec("train", args);
      return cmd_train(tr, rec);
    }
    if (b->parsed()) {
      RunRecord rec("ablate", args);
      return cmd_ablate(ab, rec);
    }
    RunRecord rec("analyze", args);
    return cmd_analyze(an, rec);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
