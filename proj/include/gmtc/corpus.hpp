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

// Labelled utterance inventories and seeded train/test partitions.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gmtc/audio.hpp"
#include "gmtc/tensor.hpp"

namespace gmtc {

struct ManifestEntry {
  std::string path;  // relative to the corpus root
  std::string label;
  std::string speaker;
  std::string corpus;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> label_set;
  std::vector<std::string> rejects;  // files whose name carried no known emotion code

  std::size_t label_index(const std::string& label) const {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    if (it == label_set.end()) throw DataError("label '" + label + "' not in label set");
    return static_cast<std::size_t>(it - label_set.begin());
  }
  std::vector<std::size_t> label_indices() const {
    std::vector<std::size_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(label_index(e.label));
    return out;
  }
  std::map<std::string, std::size_t> class_counts() const {
    std::map<std::string, std::size_t> m;
    for (const auto& e : entries) ++m[e.label];
    return m;
  }

  friend bool operator==(const Manifest& a, const Manifest& b) {
    return a.entries == b.entries && a.label_set == b.label_set;
  }
};

enum class CorpusKind { casia, emodb, ravdess, savee };

inline CorpusKind parse_corpus_kind(const std::string& s) {
  if (s == "casia") return CorpusKind::casia;
  if (s == "emodb") return CorpusKind::emodb;
  if (s == "ravdess") return CorpusKind::ravdess;
  if (s == "savee") return CorpusKind::savee;
  throw std::invalid_argument("unknown corpus kind '" + s + "' (casia|emodb|ravdess|savee)");
}

inline std::string to_string(CorpusKind k) {
  switch (k) {
    case CorpusKind::casia: return "casia";
    case CorpusKind::emodb: return "emodb";
    case CorpusKind::ravdess: return "ravdess";
    case CorpusKind::savee: return "savee";
  }
  return "?";
}

/// Emotion inventory of each corpus, alphabetical.
inline std::vector<std::string> corpus_classes(CorpusKind k) {
  switch (k) {
    case CorpusKind::casia: return {"angry", "fear", "happy", "neutral", "sad", "surprise"};
    case CorpusKind::emodb: return {"angry", "boredom", "disgust", "fear", "happy", "neutral", "sad"};
    case CorpusKind::ravdess: return {"angry", "calm", "disgust", "fear", "happy", "neutral", "sad", "surprise"};
    case CorpusKind::savee: return {"angry", "disgust", "fear", "happy", "neutral", "sad", "surprise"};
  }
  return {};
}

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_wav(const std::filesystem::path& p) { return lower(p.extension().string()) == ".wav"; }

struct Labelled {
  std::string label, speaker;
};

// EMODB: 03a01Fa.wav, emotion letter at position 6, speaker = first two digits.
inline std::optional<Labelled> label_emodb(const std::filesystem::path& rel) {
  const auto stem = rel.stem().string();
  if (stem.size() < 6) return std::nullopt;
  static const std::map<char, std::string> codes = {{'W', "angry"}, {'L', "boredom"}, {'E', "disgust"},
                                                    {'A', "fear"},  {'F', "happy"},   {'N', "neutral"},
                                                    {'T', "sad"}};
  auto it = codes.find(stem[5]);
  if (it == codes.end()) return std::nullopt;
  return Labelled{it->second, stem.substr(0, 2)};
}

// RAVDESS: 03-01-05-01-02-01-12.wav, third field = emotion, seventh = actor.
inline std::optional<Labelled> label_ravdess(const std::filesystem::path& rel) {
  std::vector<std::string> f;
  std::stringstream ss(rel.stem().string());
  for (std::string part; std::getline(ss, part, '-');) f.push_back(part);
  if (f.size() != 7) return std::nullopt;
  static const std::map<std::string, std::string> codes = {
      {"01", "neutral"}, {"02", "calm"}, {"03", "happy"},   {"04", "sad"},
      {"05", "angry"},   {"06", "fear"}, {"07", "disgust"}, {"08", "surprise"}};
  auto it = codes.find(f[2]);
  if (it == codes.end()) return std::nullopt;
  return Labelled{it->second, f[6]};
}

// SAVEE: DC/a01.wav or DC_a01.wav; prefix a, d, f, h, n, sa, su.
inline std::optional<Labelled> label_savee(const std::filesystem::path& rel) {
  auto stem = rel.stem().string();
  std::string speaker = rel.has_parent_path() ? rel.parent_path().filename().string() : "";
  if (const auto us = stem.find('_'); us != std::string::npos) {
    speaker = stem.substr(0, us);
    stem = stem.substr(us + 1);
  }
  std::size_t digits = 0;
  while (digits < stem.size() && !std::isdigit(static_cast<unsigned char>(stem[digits]))) ++digits;
  const auto code = stem.substr(0, digits);
  static const std::map<std::string, std::string> codes = {{"a", "angry"}, {"d", "disgust"}, {"f", "fear"},
                                                           {"h", "happy"}, {"n", "neutral"}, {"sa", "sad"},
                                                           {"su", "surprise"}};
  auto it = codes.find(code);
  if (it == codes.end() || digits == stem.size()) return std::nullopt;
  return Labelled{it->second, speaker};
}

// CASIA: <speaker>/<emotion>/<id>.wav.
inline std::optional<Labelled> label_casia(const std::filesystem::path& rel) {
  if (!rel.has_parent_path()) return std::nullopt;
  const auto emotion = lower(rel.parent_path().filename().string());
  const auto classes = corpus_classes(CorpusKind::casia);
  if (std::find(classes.begin(), classes.end(), emotion) == classes.end()) return std::nullopt;
  const auto spk = rel.parent_path().has_parent_path() ? rel.parent_path().parent_path().filename().string() : "";
  return Labelled{emotion, spk};
}

}  // namespace detail

/// Walks `root` for WAV files and labels them from the corpus naming scheme.
/// Entries are sorted by path, so the result does not depend on listing order.
inline Manifest scan_corpus(const std::filesystem::path& root, CorpusKind kind) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError("corpus root is not a readable directory: " + root.string());
  Manifest m;
  m.label_set = corpus_classes(kind);
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec))
    if (it->is_regular_file() && detail::is_wav(it->path())) files.push_back(fs::relative(it->path(), root));
  if (ec) throw DataError("cannot read corpus directory " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  for (const auto& rel : files) {
    std::optional<detail::Labelled> lab;
    switch (kind) {
      case CorpusKind::emodb: lab = detail::label_emodb(rel); break;
      case CorpusKind::ravdess: lab = detail::label_ravdess(rel); break;
      case CorpusKind::savee: lab = detail::label_savee(rel); break;
      case CorpusKind::casia: lab = detail::label_casia(rel); break;
    }
    if (!lab) {
      m.rejects.push_back(rel.generic_string());
      continue;
    }
    m.entries.push_back({rel.generic_string(), lab->label, lab->speaker, to_string(kind)});
  }
  if (m.entries.empty()) throw DataError("no " + to_string(kind) + " utterances found under " + root.string());
  return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

/// Parses `path,label,speaker,corpus` CSV text. If `declared` is non-empty it
/// becomes the label set and every label must belong to it.
inline Manifest parse_manifest_csv(const std::string& text, const std::vector<std::string>& declared = {}) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"path", "label", "speaker", "corpus"})
    if (!col.count(need)) throw DataError(std::string("manifest: missing column '") + need + "'");

  Manifest m;
  std::set<std::string> seen, labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < header.size())
      throw DataError("manifest line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields");
    ManifestEntry e{f[col["path"]], f[col["label"]], f[col["speaker"]], f[col["corpus"]]};
    if (e.path.empty() || e.label.empty()) throw DataError("manifest line " + std::to_string(line_no) + ": empty path or label");
    if (!seen.insert(e.path).second) throw DataError("manifest: duplicate path " + e.path);
    if (!declared.empty() && std::find(declared.begin(), declared.end(), e.label) == declared.end())
      throw DataError("manifest: unknown label '" + e.label + "' at line " + std::to_string(line_no));
    labels.insert(e.label);
    m.entries.push_back(std::move(e));
  }
  m.label_set = declared.empty() ? std::vector<std::string>(labels.begin(), labels.end()) : declared;
  return m;
}

inline Manifest load_manifest_csv(const std::filesystem::path& path, const std::vector<std::string>& declared = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_manifest_csv(ss.str(), declared);
}

inline std::string manifest_csv(const Manifest& m) {
  std::string out = "path,label,speaker,corpus\n";
  for (const auto& e : m.entries)
    out += detail::csv_field(e.path) + "," + detail::csv_field(e.label) + "," + detail::csv_field(e.speaker) + "," +
           detail::csv_field(e.corpus) + "\n";
  return out;
}

inline void save_manifest_csv(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write manifest " + path.string());
  f << manifest_csv(m);
}

// ---- synthetic corpus -------------------------------------------------------

struct SynthOptions {
  std::uint64_t seed = 1;
  std::size_t per_class = 10;
  std::size_t classes = 6;
  int sample_rate = 22050;
  double min_seconds = 1.0;
  double max_seconds = 3.0;
};

/// Class-conditional recipe: a harmonic tone whose pitch contour, amplitude
/// modulation and noise floor depend on the class.
struct SynthRecipe {
  double f0 = 150.0;          // Hz at the start of the clip
  double glide = 0.0;         // octaves travelled over the clip
  double am_rate = 0.0;       // Hz
  double am_depth = 0.0;      // 0..1
  double noise = 0.02;        // white-noise amplitude relative to the tone
  int harmonics = 6;
  double tilt = 1.0;          // harmonic h amplitude ~ h^-tilt
};

inline SynthRecipe synth_recipe(std::size_t cls) {
  // Paired classes share a register and noise floor but differ in temporal
  // structure (glide direction, modulation rate), which frame-averaged
  // features cannot fully separate.
  static const SynthRecipe table[] = {
      {160.0, +0.7, 3.0, 0.5, 0.04, 6, 0.9},   // rising, tremolo
      {250.0, -0.7, 3.0, 0.5, 0.04, 6, 1.2},   // falling, tremolo
      {130.0, 0.0, 7.0, 0.8, 0.02, 8, 0.7},    // steady, fast AM
      {130.0, 0.0, 1.5, 0.8, 0.02, 8, 0.9},    // steady, slow AM
      {220.0, +0.4, 0.0, 0.0, 0.10, 5, 1.2},   // mild rise, breathy
      {300.0, -0.4, 0.0, 0.0, 0.06, 5, 1.5},   // mild fall, breathy
  };
  constexpr std::size_t n = sizeof(table) / sizeof(table[0]);
  SynthRecipe r = table[cls % n];
  // Additional classes reuse the table with a shifted register.
  r.f0 *= 1.0 + 0.35 * static_cast<double>(cls / n);
  return r;
}

inline std::string synth_label(std::size_t cls) {
  static const char* names[] = {"angry", "fear", "happy", "neutral", "sad", "surprise"};
  constexpr std::size_t n = sizeof(names) / sizeof(names[0]);
  return cls < n ? names[cls] : "class" + std::to_string(cls);
}

/// One clip of class `cls`; all randomness comes from `rng`.
inline AudioClip synth_clip(std::size_t cls, const SynthOptions& opt, Rng& rng) {
  constexpr double kTwoPi = 6.28318530717958647692;
  const SynthRecipe r = synth_recipe(cls);
  const double seconds = uniform(rng, opt.min_seconds, opt.max_seconds);
  const auto n = static_cast<std::size_t>(seconds * opt.sample_rate);
  const double gain = uniform(rng, 0.3, 0.42);
  const double f0 = r.f0 * uniform(rng, 0.88, 1.12);
  const double am_rate = r.am_rate * uniform(rng, 0.85, 1.15);
  const double am_phase = uniform(rng, 0.0, kTwoPi);
  const double noise = r.noise * uniform(rng, 0.85, 1.15);
  const double dur = static_cast<double>(n) / opt.sample_rate;

  AudioClip clip;
  clip.sample_rate = opt.sample_rate;
  clip.samples.resize(n);
  double phase = 0.0;
  double norm = 0.0;
  for (int h = 1; h <= r.harmonics; ++h) norm += std::pow(h, -r.tilt);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / opt.sample_rate;
    const double f = f0 * std::pow(2.0, r.glide * t / dur);
    phase += kTwoPi * f / opt.sample_rate;
    double tone = 0.0;
    for (int h = 1; h <= r.harmonics; ++h) {
      if (f * h >= opt.sample_rate / 2.0) break;
      tone += std::pow(h, -r.tilt) * std::sin(h * phase);
    }
    tone /= norm;
    const double env = 1.0 - r.am_depth * 0.5 * (1.0 + std::sin(kTwoPi * am_rate * t + am_phase));
    const double fade = std::min({1.0, t / 0.02, (dur - t) / 0.02});
    clip.samples[i] = static_cast<float>(gain * (fade * env * tone + noise * gaussian(rng)));
  }
  return clip;
}

/// Writes classes * per_class WAV files plus manifest.csv under `out_dir`.
inline Manifest synth_generate(const std::filesystem::path& out_dir, const SynthOptions& opt) {
  if (opt.per_class < 1) throw std::invalid_argument("synth: per_class must be >= 1");
  if (opt.classes < 2) throw std::invalid_argument("synth: need at least 2 classes");
  std::filesystem::create_directories(out_dir);
  Rng rng(opt.seed);
  Manifest m;
  for (std::size_t c = 0; c < opt.classes; ++c) m.label_set.push_back(synth_label(c));
  std::sort(m.label_set.begin(), m.label_set.end());
  for (std::size_t c = 0; c < opt.classes; ++c)
    for (std::size_t i = 0; i < opt.per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03zu.wav", synth_label(c).c_str(), i);
      const auto clip = synth_clip(c, opt, rng);
      write_wav(out_dir / name, clip);
      m.entries.push_back({name, synth_label(c), "spk" + std::to_string(i % 4), "synth"});
    }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  save_manifest_csv(out_dir / "manifest.csv", m);
  return m;
}

// ---- splits -------------------------------------------------------------------

enum class SplitScheme { holdout_80_20, cv5, cv10 };

inline SplitScheme parse_split_scheme(const std::string& s) {
  if (s == "holdout" || s == "holdout_80_20") return SplitScheme::holdout_80_20;
  if (s == "cv5") return SplitScheme::cv5;
  if (s == "cv10") return SplitScheme::cv10;
  throw std::invalid_argument("unknown split scheme '" + s + "' (holdout|cv5|cv10)");
}

inline std::string to_string(SplitScheme s) {
  switch (s) {
    case SplitScheme::holdout_80_20: return "holdout";
    case SplitScheme::cv5: return "cv5";
    case SplitScheme::cv10: return "cv10";
  }
  return "?";
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  friend bool operator==(const Fold&, const Fold&) = default;
};

struct SplitPlan {
  SplitScheme scheme = SplitScheme::holdout_80_20;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Stratified, utterance-level splits; deterministic per seed.
///
/// Each class is shuffled independently. For k-fold CV the shuffled members
/// are dealt round-robin, continuing the fold counter across classes so fold
/// sizes stay within one of each other. Hold-out draws 20% of the total with
/// per-class quotas apportioned by largest remainder.
inline SplitPlan make_splits(const std::vector<std::size_t>& labels, std::size_t n_classes, SplitScheme scheme,
                             std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw std::out_of_range("make_splits: label out of range");
    members[labels[i]].push_back(i);
  }
  Rng rng(seed);
  for (auto& m : members) shuffle(m, rng);

  SplitPlan plan{scheme, seed, {}};
  const std::size_t n = labels.size();
  std::vector<int> fold_of(n, -1);

  if (scheme == SplitScheme::holdout_80_20) {
    for (std::size_t c = 0; c < n_classes; ++c)
      if (!members[c].empty() && members[c].size() < 2)
        throw DataError("make_splits: class " + std::to_string(c) + " has fewer than 2 samples");
    const std::size_t target = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
    std::vector<std::size_t> quota(n_classes);
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double exact = 0.2 * static_cast<double>(members[c].size());
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += quota[c];
      rem.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::stable_sort(rem.begin(), rem.end());
    for (std::size_t r = 0; assigned < target && r < rem.size(); ++r, ++assigned) ++quota[rem[r].second];
    for (std::size_t c = 0; c < n_classes; ++c)
      for (std::size_t k = 0; k < members[c].size(); ++k) fold_of[members[c][k]] = k < quota[c] ? 0 : 1;
    Fold f;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == 0 ? f.test : f.train).push_back(i);
    plan.folds.push_back(std::move(f));
    return plan;
  }

  const std::size_t k = scheme == SplitScheme::cv5 ? 5 : 10;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (!members[c].empty() && members[c].size() < k)
      throw DataError("make_splits: class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                      " samples, fewer than " + std::to_string(k) + " folds");
  std::size_t counter = 0;
  for (std::size_t c = 0; c < n_classes; ++c)
    for (auto idx : members[c]) fold_of[idx] = static_cast<int>(counter++ % k);
  plan.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) (fold_of[i] == static_cast<int>(f) ? plan.folds[f].test : plan.folds[f].train).push_back(i);
  return plan;
}

inline SplitPlan make_splits(const Manifest& m, SplitScheme scheme, std::uint64_t seed) {
  return make_splits(m.label_indices(), m.label_set.size(), scheme, seed);
}

}  // namespace gmtc
