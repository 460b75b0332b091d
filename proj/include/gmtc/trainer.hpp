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

// Mini-batch training, evaluation and cross-validation.
//
// Training is sequential and seeded: the same data, fold, configs and seed
// reproduce the same parameters bit for bit.

#pragma once

#include <chrono>
#include <functional>
#include <sstream>

#include "gmtc/adam.hpp"
#include "gmtc/corpus.hpp"
#include "gmtc/metrics.hpp"
#include "gmtc/model.hpp"

namespace gmtc {

struct TrainConfig {
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double beta1 = 0.93;
  double beta2 = 0.98;
  double epsilon = 1e-8;
  std::size_t max_epochs = 300;
  std::size_t patience = 50;  // epochs without validation-WAR improvement
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool stop_on_perfect_train = false;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
    if (patience > max_epochs) throw std::invalid_argument("train config: patience must be <= max_epochs");
  }

  KeyValues to_kv() const {
    KeyValues kv;
    kv.set("batch_size", batch_size);
    kv.set("lr", lr);
    kv.set("beta1", beta1);
    kv.set("beta2", beta2);
    kv.set("epsilon", epsilon);
    kv.set("max_epochs", max_epochs);
    kv.set("patience", patience);
    kv.set("seed", static_cast<std::size_t>(seed));
    kv.set("shuffle", shuffle);
    kv.set("stop_on_perfect_train", stop_on_perfect_train);
    return kv;
  }

  static TrainConfig from_kv(const KeyValues& kv) { return from_kv(kv, TrainConfig()); }
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig c) {
    c.batch_size = kv.get("batch_size", c.batch_size);
    c.lr = kv.get("lr", c.lr);
    c.beta1 = kv.get("beta1", c.beta1);
    c.beta2 = kv.get("beta2", c.beta2);
    c.epsilon = kv.get("epsilon", c.epsilon);
    c.max_epochs = kv.get("max_epochs", c.max_epochs);
    c.patience = kv.get("patience", std::min(c.patience, c.max_epochs));
    c.seed = kv.get("seed", static_cast<std::size_t>(c.seed));
    c.shuffle = kv.get("shuffle", c.shuffle);
    c.stop_on_perfect_train = kv.get("stop_on_perfect_train", c.stop_on_perfect_train);
    c.validate();
    return c;
  }
};

/// Equal-length feature maps with class indices into label_set.
struct Dataset {
  std::vector<FeatureMatrix> features;
  std::vector<std::size_t> labels;
  std::vector<std::string> label_set;

  std::size_t size() const { return features.size(); }
  std::size_t seq_len() const { return features.empty() ? 0 : features.front().padded_len(); }
  std::size_t channels() const { return features.empty() ? 0 : features.front().channels(); }

  void validate() const {
    if (features.empty()) throw DataError("dataset: no utterances");
    if (features.size() != labels.size())
      throw DataError("dataset: " + std::to_string(features.size()) + " feature maps but " +
                      std::to_string(labels.size()) + " labels");
    for (const auto& f : features)
      if (f.padded_len() != seq_len() || f.channels() != channels())
        throw DataError("dataset: feature map '" + f.clip_id + "' is not padded to a common shape");
    for (auto l : labels)
      if (l >= label_set.size()) throw DataError("dataset: label index out of range");
  }

  /// B x T x C batch for the given utterance indices.
  Tensor<float> batch(std::span<const std::size_t> idx, std::vector<std::size_t>* lengths = nullptr) const {
    const std::size_t nt = seq_len(), nc = channels();
    Tensor<float> x(Shape{idx.size(), nt, nc});
    if (lengths) lengths->clear();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto& f = features[idx[b]];
      std::copy_n(f.frames.data(), nt * nc, x.data() + b * nt * nc);
      if (lengths) lengths->push_back(f.true_len);
    }
    return x;
  }
};

/// Pairs each manifest entry with its cached feature map (matched by clip id).
inline Dataset make_dataset(const std::vector<FeatureMatrix>& features, const Manifest& manifest) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < features.size(); ++i) by_id.emplace(features[i].clip_id, i);
  Dataset ds;
  ds.label_set = manifest.label_set;
  for (const auto& e : manifest.entries) {
    auto it = by_id.find(e.path);
    if (it == by_id.end()) throw DataError("no cached features for manifest entry " + e.path);
    ds.features.push_back(features[it->second]);
    ds.labels.push_back(manifest.label_index(e.label));
  }
  ds.validate();
  return ds;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_war = 0.0;
  double val_war = 0.0;
  double seconds = 0.0;
};

inline std::string history_csv(const std::vector<EpochRecord>& h) {
  std::ostringstream os;
  os << "epoch,train_loss,train_war,val_war,seconds\n";
  os.precision(17);
  for (const auto& r : h)
    os << r.epoch << ',' << r.train_loss << ',' << r.train_war << ',' << r.val_war << ',' << r.seconds << '\n';
  return os.str();
}

/// Drops the trailing wall-clock column, leaving the reproducible part of a history CSV.
inline std::string strip_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string out;
  for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

struct TrainResult {
  ParamStore<float> params;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_war = -1.0;
};

/// argmax of logits for the given utterances, evaluated in batches.
inline std::vector<std::size_t> predict(const Dataset& ds, std::span<const std::size_t> idx, const ModelConfig& cfg,
                                        const ParamStore<float>& params, std::size_t batch_size = 64) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  std::vector<std::size_t> lengths;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const auto chunk = idx.subspan(start, std::min(batch_size, idx.size() - start));
    const auto x = ds.batch(chunk, &lengths);
    const auto fp = forward_pass(x, cfg, params, std::span<const std::size_t>(lengths));
    const std::size_t k = cfg.n_classes;
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const float* row = fp.logits.data() + b * k;
      out.push_back(static_cast<std::size_t>(std::max_element(row, row + k) - row));
    }
  }
  return out;
}

inline EvalReport evaluate(const ModelConfig& cfg, const ParamStore<float>& params, const Dataset& ds,
                           std::span<const std::size_t> idx) {
  if (idx.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (ds.seq_len() != cfg.seq_len || ds.channels() != cfg.channels)
    throw ShapeError("evaluate: features are " + std::to_string(ds.seq_len()) + " x " + std::to_string(ds.channels()) +
                     ", checkpoint expects " + std::to_string(cfg.seq_len) + " x " + std::to_string(cfg.channels));
  const auto pred = predict(ds, idx, cfg, params);
  std::vector<std::size_t> truth;
  for (auto i : idx) truth.push_back(ds.labels[i]);
  return compute_report(truth, pred, ds.label_set);
}

/// Mean cross-entropy and its gradient with respect to the logits (B x K).
inline double batch_loss(const Tensor<float>& logits, std::span<const std::size_t> labels, Tensor<float>& grad) {
  const std::size_t nb = logits.dim(0), k = logits.dim(1);
  const Tensor<float> probs = softmax(logits);
  grad = probs;
  double loss = 0.0;
  const float inv_b = 1.0f / static_cast<float>(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const float p = probs(b, labels[b]);
    loss += -std::log(std::max(static_cast<double>(p), 1e-30));
    grad(b, labels[b]) -= 1.0f;
    for (std::size_t c = 0; c < k; ++c) grad(b, c) *= inv_b;
  }
  return loss / static_cast<double>(nb);
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on fold.train, selecting parameters by WAR on fold.test (or on the
/// training set when the fold has no test part). `init` overrides the seeded
/// Xavier initialization.
inline TrainResult train(const Dataset& ds, const Fold& fold, const ModelConfig& cfg, const TrainConfig& tc,
                         const ParamStore<float>* init = nullptr, const EpochCallback& on_epoch = {}) {
  ds.validate();
  tc.validate();
  cfg.validate();
  if (ds.seq_len() != cfg.seq_len || ds.channels() != cfg.channels)
    throw ShapeError("train: features are " + std::to_string(ds.seq_len()) + " x " + std::to_string(ds.channels()) +
                     ", model expects " + std::to_string(cfg.seq_len) + " x " + std::to_string(cfg.channels));
  if (cfg.n_classes != ds.label_set.size())
    throw ShapeError("train: model has " + std::to_string(cfg.n_classes) + " classes, data has " +
                     std::to_string(ds.label_set.size()));
  for (const auto& f : ds.features)
    for (float v : f.frames.values())
      if (!std::isfinite(v)) throw NumericError("train: non-finite feature value in " + f.clip_id);
  if (fold.train.empty()) throw std::invalid_argument("train: empty training split");
  for (auto i : fold.train)
    if (i >= ds.size()) throw std::out_of_range("train: fold index out of range");
  for (auto i : fold.test)
    if (i >= ds.size()) throw std::out_of_range("train: fold index out of range");

  ParamStore<float> params = init ? *init : ParamStore<float>::xavier(cfg, tc.seed);
  AdamState<float> adam;
  adam.hyper = {tc.lr, tc.beta1, tc.beta2, tc.epsilon};
  Rng shuffle_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult res;
  res.params = params;
  std::vector<std::size_t> order = fold.train;
  std::vector<std::size_t> lengths, batch_labels;
  Tensor<float> grad_logits;
  const auto& val_idx = fold.test.empty() ? fold.train : fold.test;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (tc.shuffle) shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const auto chunk = std::span<const std::size_t>(order).subspan(start, std::min(tc.batch_size, order.size() - start));
      const auto x = ds.batch(chunk, &lengths);
      batch_labels.clear();
      for (auto i : chunk) batch_labels.push_back(ds.labels[i]);
      const auto fp = forward_pass(x, cfg, params, std::span<const std::size_t>(lengths), true);
      const double loss = batch_loss(fp.logits, batch_labels, grad_logits);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      const auto grads = backward(fp, grad_logits, cfg, params);
      adam_step(std::span<Tensor<float>>(params.tensors()), std::span<const Tensor<float>>(grads.tensors()), adam);
      loss_sum += loss;
      ++n_batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_batches);
    rec.train_war = evaluate(cfg, params, ds, fold.train).war;
    rec.val_war = fold.test.empty() ? rec.train_war : evaluate(cfg, params, ds, val_idx).war;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_war > res.best_val_war) {
      res.best_val_war = rec.val_war;
      res.best_epoch = epoch;
      res.params = params;
    } else if (epoch - res.best_epoch >= tc.patience) {
      break;
    }
    if (tc.stop_on_perfect_train && rec.train_war >= 1.0) break;
  }
  return res;
}

struct CvResult {
  std::vector<TrainResult> runs;
  std::vector<EvalReport> reports;
  SummaryStat war;
  SummaryStat uar;

  nlohmann::json summary_json() const {
    auto stat = [](const SummaryStat& s) {
      return nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
    };
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i)
      folds.push_back({{"fold", i}, {"war", reports[i].war}, {"uar", reports[i].uar}, {"best_epoch", runs[i].best_epoch}});
    return {{"folds", folds}, {"war", stat(war)}, {"uar", stat(uar)}};
  }
};

/// Trains and evaluates every fold of a plan with at least two folds.
inline CvResult run_cv(const Dataset& ds, const SplitPlan& plan, const ModelConfig& cfg, const TrainConfig& tc,
                       const std::function<void(std::size_t, const TrainResult&, const EvalReport&)>& on_fold = {}) {
  if (plan.folds.size() < 2) throw std::invalid_argument("run_cv: plan needs at least 2 folds");
  CvResult cv;
  std::vector<double> wars, uars;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    try {
      auto run = train(ds, plan.folds[f], cfg, tc);
      auto rep = evaluate(cfg, run.params, ds, plan.folds[f].test);
      wars.push_back(rep.war);
      uars.push_back(rep.uar);
      if (on_fold) on_fold(f, run, rep);
      cv.runs.push_back(std::move(run));
      cv.reports.push_back(std::move(rep));
    } catch (const NumericError& e) {
      throw NumericError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  cv.war = summarize(wars);
  cv.uar = summarize(uars);
  return cv;
}

}  // namespace gmtc
