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
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gmtc/audio.hpp"
#include "gmtc/corpus.hpp"
#include "gmtc/mfcc.hpp"

namespace gmtc {

/// Worker count from GMTC_THREADS, else the hardware concurrency.
inline unsigned thread_budget() {
  if (const char* env = std::getenv("GMTC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline unsigned worker_count(std::size_t n, unsigned threads) {
  return static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
}

/// Calls fn(i, worker) for every i in [0, n) on worker_count(n, threads)
/// workers. Each index is claimed by exactly one worker; the first exception
/// is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&](unsigned w) {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i, w);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next = n;
      }
    }
  };
  const unsigned nw = worker_count(n, threads);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < nw; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct ExtractResult {
  std::vector<FeatureMatrix> features;  // padded, manifest order
  Manifest manifest;                    // entries that produced features
  std::vector<std::string> failures;    // "path: reason", manifest order
  std::size_t t_max = 0;
  std::size_t truncated = 0;
};

/// Reads, resamples and featurizes every manifest entry under `root`.
/// Files are independent, so they are processed on up to `threads` workers;
/// each output slot is written by exactly one worker.
inline ExtractResult extract_features(const std::filesystem::path& root, const Manifest& manifest,
                                      std::optional<std::size_t> t_max = std::nullopt, unsigned threads = 1) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<FeatureMatrix>> slots(n);
  std::vector<std::string> errors(n);
  std::vector<std::unique_ptr<MfccExtractor>> extractors(worker_count(n, threads));
  parallel_for(n, threads, [&](std::size_t i, unsigned w) {
    if (!extractors[w]) extractors[w] = std::make_unique<MfccExtractor>();
    auto& ex = *extractors[w];
    const auto& e = manifest.entries[i];
    try {
      auto clip = read_wav(root / e.path);
      if (clip.samples.empty()) throw DataError("empty audio");
      clip = resample(clip, ex.options().sample_rate);
      slots[i] = ex.extract(clip, e.path);
    } catch (const std::exception& err) {
      errors[i] = e.path + ": " + err.what();
    }
  });

  ExtractResult out;
  out.manifest.label_set = manifest.label_set;
  std::vector<FeatureMatrix> raw;
  for (std::size_t i = 0; i < n; ++i) {
    if (!slots[i]) {
      out.failures.push_back(errors[i]);
      continue;
    }
    raw.push_back(std::move(*slots[i]));
    out.manifest.entries.push_back(manifest.entries[i]);
  }
  out.t_max = t_max ? *t_max : corpus_t_max(raw);
  for (const auto& fm : raw) out.features.push_back(pad_to(fm, out.t_max, &out.truncated));
  return out;
}

}  // namespace gmtc
