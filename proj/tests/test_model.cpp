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
#include <vector>

#include "gmtc/gradcheck.hpp"
#include "gmtc/checkpoint.hpp"
#include "gmtc/model.hpp"
#include "test_support.hpp"

using namespace gmtc;
using gmtc::testing::TempDir;

namespace {

using Mat = std::vector<std::vector<double>>;  // [t][c]

// Loop-only transcription of the network used as an oracle for forward_pass.
Mat ref_conv(const Mat& x, const Tensor<double>& k, const Tensor<double>& b, std::size_t d) {
  const std::size_t nt = x.size(), co = k.dim(0), ci = k.dim(1), ks = k.dim(2);
  Mat y(nt, std::vector<double>(co, 0.0));
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t o = 0; o < co; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < ks; ++i) {
        if (t < i * d) continue;
        for (std::size_t c = 0; c < ci; ++c) acc += k(o, c, i) * x[t - i * d][c];
      }
      y[t][o] = acc;
    }
  return y;
}

std::vector<double> ref_logits(const Mat& x, const ModelConfig& cfg, const ParamStore<double>& p,
                               std::vector<Mat>* block_maps = nullptr) {
  const std::size_t nt = x.size(), nc = cfg.channels;
  Mat g = ref_conv(x, p.at("entry.kernel"), p.at("entry.bias"), 1);
  Mat skip(nt, std::vector<double>(nc, 0.0));
  for (std::size_t i = 1; i <= cfg.n_gcb; ++i) {
    Mat u = g;
    for (std::size_t l = 1; l <= cfg.gating_levels; ++l) {
      const std::size_t d = cfg.drd_scheme == DrdScheme::raw ? (std::size_t{1} << (i - 1))
                                                             : std::min((std::size_t{1} << (i - 1)) << (l - 1),
                                                                        cfg.max_dilation_cap());
      Mat mean(nt, std::vector<double>(nc, 0.0));
      for (std::size_t j = 1; j <= cfg.n_gscb; ++j) {
        const std::string pre = "gcb" + std::to_string(i) + ".level" + std::to_string(l) + ".gscb" + std::to_string(j) + ".";
        const Mat v = ref_conv(u, p.at(pre + "value.kernel"), p.at(pre + "value.bias"), d);
        const Mat q = ref_conv(u, p.at(pre + "gate.kernel"), p.at(pre + "gate.bias"), d);
        for (std::size_t t = 0; t < nt; ++t)
          for (std::size_t c = 0; c < nc; ++c) {
            const double gate = 1.0 / (1.0 + std::exp(-std::max(q[t][c], 0.0)));
            mean[t][c] += std::max(v[t][c], 0.0) * gate / static_cast<double>(cfg.n_gscb);
          }
      }
      u = mean;
    }
    if (block_maps) block_maps->push_back(u);
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t c = 0; c < nc; ++c) {
        if (cfg.skip_mode == SkipMode::multi_scale || i == cfg.n_gcb) skip[t][c] += u[t][c];
        g[t][c] += u[t][c];
      }
  }
  std::vector<double> pooled(nc, 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t c = 0; c < nc; ++c) {
      const double s = skip[t][c];
      pooled[c] += (s >= 0 ? s : cfg.leaky_alpha * s) / static_cast<double>(nt);
    }
  const auto& w = p.at("head.weight");
  const auto& b = p.at("head.bias");
  std::vector<double> z(cfg.n_classes);
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    z[k] = b[k];
    for (std::size_t c = 0; c < nc; ++c) z[k] += w(k, c) * pooled[c];
  }
  return z;
}

ModelConfig tiny(std::size_t n_gcb = 2, std::size_t levels = 2, std::size_t j = 1, std::size_t k = 3,
                 std::size_t t = 16) {
  ModelConfig c;
  c.n_gcb = n_gcb;
  c.gating_levels = levels;
  c.n_gscb = j;
  c.n_classes = k;
  c.seq_len = t;
  return c;
}

ParamStore<double> random_params(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.4) {
  ParamStore<double> p(cfg);
  Rng rng(seed);
  for (auto& t : p.tensors())
    for (auto& v : t.values()) v = uniform(rng, -scale, scale);
  return p;
}

Mat to_mat(const Tensor<double>& x) {
  Mat m(x.dim(0), std::vector<double>(x.dim(1)));
  for (std::size_t t = 0; t < x.dim(0); ++t)
    for (std::size_t c = 0; c < x.dim(1); ++c) m[t][c] = x(t, c);
  return m;
}

}  // namespace

TEST_CASE("parameter counts match allocation and the reference table", "[model][structure]") {
  struct Row {
    DrdScheme drd;
    std::size_t n_gcb, expected, nominal, actual;
  };
  const Row rows[] = {{DrdScheme::ours, 7, 260604, 256, 382},
                      {DrdScheme::ours, 6, 223632, 128, 190},
                      {DrdScheme::raw, 7, 260604, 128, 128},
                      {DrdScheme::raw, 8, 297576, 256, 256}};
  for (const auto& r : rows) {
    ModelConfig c;
    c.drd_scheme = r.drd;
    c.n_gcb = r.n_gcb;
    c.n_classes = 6;
    CHECK(param_count(c) == r.expected);
    CHECK(ParamStore<float>(c).scalar_count() == r.expected);
    CHECK(receptive_field(c).nominal == r.nominal);
  }
  ModelConfig ours7;
  CHECK(receptive_field(ours7).actual == 382);
  ours7.n_gcb = 6;
  CHECK(receptive_field(ours7).actual == 190);
  ModelConfig raw8;
  raw8.drd_scheme = DrdScheme::raw;
  raw8.n_gcb = 8;
  CHECK(receptive_field(raw8).actual == 511);

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    ModelConfig c;
    c.n_gcb = 1 + rng() % 9;
    c.gating_levels = 1 + rng() % 4;
    c.n_gscb = 1 + rng() % 5;
    c.n_classes = 2 + rng() % 8;
    c.kernel_size = 1 + rng() % 3;
    REQUIRE(param_count(c) == ParamStore<float>(c).scalar_count());
  }
}

TEST_CASE("dilation schedule per block and level", "[model][structure]") {
  ModelConfig c;
  CHECK(c.dilation(1, 1) == 1);
  CHECK(c.dilation(1, 2) == 2);
  CHECK(c.dilation(7, 1) == 64);
  CHECK(c.dilation(7, 2) == 128);
  c.drd_scheme = DrdScheme::raw;
  CHECK(c.dilation(7, 1) == 64);
  CHECK(c.dilation(7, 2) == 64);
  ModelConfig deep;
  deep.gating_levels = 4;
  CHECK(deep.dilation(7, 4) == 128);
  CHECK(deep.dilation(1, 4) == 8);
}

TEST_CASE("config validation and key=value round trip", "[model][config]") {
  ModelConfig c;
  c.n_gcb = 3;
  c.skip_mode = SkipMode::max_scale;
  c.drd_scheme = DrdScheme::raw;
  c.leaky_alpha = 0.125;
  CHECK(ModelConfig::from_kv(KeyValues::parse(c.canonical_text())) == c);
  CHECK_THROWS_AS(ModelConfig::from_kv(KeyValues::parse("skip_mode=widest\n")), DataError);
  CHECK_THROWS(ModelConfig::from_kv(KeyValues::parse("n_classes=1\n")));
  CHECK_THROWS(ModelConfig::from_kv(KeyValues::parse("n_gcb=0\n")));
}

TEST_CASE("gated sub-block hand cases", "[model][gscb]") {
  const ConvParams<double> zero{Tensor<double>(Shape{3, 3, 2}), Tensor<double>(Shape{3}), 2};
  const Tensor<double> u(Shape{5, 3}, 1.7);
  const auto out = gscb_forward(u, zero, zero);
  for (double v : out.values()) CHECK(v == 0.0);

  const ConvParams<double> value{Tensor<double>(Shape{1, 1, 1}), Tensor<double>::vector({2.0}), 1};
  const ConvParams<double> gate{Tensor<double>(Shape{1, 1, 1}), Tensor<double>::vector({0.0}), 1};
  CHECK(gscb_forward(Tensor<double>(Shape{1, 1}), value, gate)[0] == 1.0);

  ConvParams<double> other = gate;
  other.dilation = 2;
  CHECK_THROWS_AS(gscb_forward(Tensor<double>(Shape{1, 1}), value, other), std::invalid_argument);
}

TEST_CASE("zero sub-blocks give residual passthrough and bias logits", "[model]") {
  for (auto mode : {SkipMode::multi_scale, SkipMode::max_scale}) {
    auto cfg = tiny(3);
    cfg.skip_mode = mode;
    auto p = ParamStore<double>::xavier(cfg, 4).cast<double>();
    for (std::size_t i = 2; i < p.head_weight(); ++i) p[i].fill(0.0);
    p[p.head_bias()] = Tensor<double>::vector({0.5, -1.0, 2.0});
    Rng rng(1);
    const auto x = random_tensor<double>(Shape{16, 39}, rng);
    const auto fp = forward_pass(x, cfg, p);
    for (double v : fp.skip_sum.values()) REQUIRE(v == 0.0);
    for (std::size_t b = 0; b < cfg.n_gcb; ++b) {
      for (double v : fp.block_output(b).values()) REQUIRE(v == 0.0);
      if (b + 1 < cfg.n_gcb) REQUIRE(fp.block_in[b + 1] == fp.block_in[b]);
    }
    CHECK(fp.logits.storage() == std::vector<double>{0.5, -1.0, 2.0});
  }
  const auto cfg = tiny();
  const ParamStore<double> zeros(cfg);
  FeatureMatrix fm{Tensor<float>(Shape{16, 39}, 0.3f), 16, "z"};
  const auto z = forward(fm, cfg, zeros);
  CHECK(z.size() == 3);
  const auto probs = softmax(z);
  for (double v : probs.values()) CHECK(v == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("forward agrees with a loop-only transcription", "[model][oracle]") {
  Rng rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    auto cfg = tiny(1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 3, 2 + rng() % 4, 4 + rng() % 20);
    cfg.drd_scheme = trial % 3 == 0 ? DrdScheme::raw : DrdScheme::ours;
    cfg.skip_mode = trial % 2 ? SkipMode::max_scale : SkipMode::multi_scale;
    const auto p = random_params(cfg, 100 + trial);
    const auto x = random_tensor<double>(Shape{cfg.seq_len, 39}, rng);
    std::vector<Mat> maps;
    const auto want = ref_logits(to_mat(x), cfg, p, &maps);
    const auto fp = forward_pass(x, cfg, p);
    for (std::size_t k = 0; k < cfg.n_classes; ++k) REQUIRE(fp.logits[k] == Catch::Approx(want[k]).epsilon(1e-10).margin(1e-12));
    for (std::size_t b = 0; b < cfg.n_gcb; ++b)
      for (std::size_t t = 0; t < cfg.seq_len; ++t)
        for (std::size_t c = 0; c < 39; ++c)
          REQUIRE(fp.block_output(b)[t * 39 + c] == Catch::Approx(maps[b][t][c]).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("one sub-block per level matches the single gated output", "[model]") {
  const auto cfg = tiny(1, 1, 1);
  const auto p = random_params(cfg, 8);
  Rng rng(2);
  const auto x = random_tensor<double>(Shape{16, 39}, rng);
  const auto fp = forward_pass(x, cfg, p);
  const ConvParams<double> v{p[p.gscb_base(0, 0, 0)], p[p.gscb_base(0, 0, 0) + 1], 1};
  const ConvParams<double> g{p[p.gscb_base(0, 0, 0) + 2], p[p.gscb_base(0, 0, 0) + 3], 1};
  const auto x0 = fp.entry_out.reshaped(Shape{16, 39});
  CHECK(gscb_forward(x0, v, g).storage() == fp.block_output(0).storage());

  auto single = cfg;
  single.skip_mode = SkipMode::max_scale;
  ParamStore<double> q(single);
  q.tensors() = p.tensors();
  CHECK(forward_pass(x, cfg, p).logits == forward_pass(x, single, q).logits);
}

TEST_CASE("block feature maps are strictly causal", "[model][causality]") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto cfg = tiny(1 + rng() % 4, 1 + rng() % 3, 1 + rng() % 3, 2 + rng() % 5, 8 + rng() % 40);
    cfg.drd_scheme = rng() % 2 ? DrdScheme::raw : DrdScheme::ours;
    cfg.skip_mode = rng() % 2 ? SkipMode::max_scale : SkipMode::multi_scale;
    const auto p = ParamStore<float>::xavier(cfg, 500 + trial);
    auto x = random_tensor<float>(Shape{cfg.seq_len, 39}, rng);
    const std::size_t t = rng() % cfg.seq_len;
    const auto a = forward_pass(x, cfg, p);
    for (std::size_t c = 0; c < 39; ++c) x(t, c) += static_cast<float>(uniform(rng, 0.5, 3.0));
    const auto b = forward_pass(x, cfg, p);
    for (std::size_t blk = 0; blk < cfg.n_gcb; ++blk)
      for (std::size_t s = 0; s < t; ++s)
        for (std::size_t c = 0; c < 39; ++c) REQUIRE(a.block_output(blk)[s * 39 + c] == b.block_output(blk)[s * 39 + c]);
  }
}

TEST_CASE("the last frame reaches the logits", "[model]") {
  const auto cfg = tiny(2, 2, 2, 4, 24);
  const auto p = random_params(cfg, 31);
  Rng rng(5);
  auto x = random_tensor<double>(Shape{24, 39}, rng);
  const auto a = forward_pass(x, cfg, p).logits;
  for (std::size_t c = 0; c < 39; ++c) x(23, c) += 1.0;
  CHECK_FALSE(forward_pass(x, cfg, p).logits == a);
}

TEST_CASE("full model gradients match central differences", "[model][gradient]") {
  const auto cfg = tiny(2, 2, 1, 3, 16);
  const auto p0 = random_params(cfg, 41);
  auto p = p0;
  Rng rng(6);
  auto x = random_tensor<double>(Shape{2, 16, 39}, rng);
  const auto r = random_tensor<double>(Shape{2, 3}, rng);
  const auto fp = forward_pass(x, cfg, p, {}, true);
  Tensor<double> gx;
  const auto grads = backward(fp, r, cfg, p, &gx);
  const auto loss = [&] { return weighted_sum(forward_pass(x, cfg, p).logits, r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, fd_max_rel_error(p[i], grads[i], loss));
  worst = std::max(worst, fd_max_rel_error(x, gx, loss));
  CHECK(worst < 1e-3);
}

TEST_CASE("gradients hold across skip modes, levels and masked pooling", "[model][gradient]") {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    auto cfg = tiny(1 + trial % 3, 1 + trial % 3, 1 + (trial / 2) % 2, 2 + trial % 3, 10);
    cfg.skip_mode = trial % 2 ? SkipMode::max_scale : SkipMode::multi_scale;
    cfg.drd_scheme = trial % 4 == 3 ? DrdScheme::raw : DrdScheme::ours;
    cfg.masked_gap = trial >= 3;
    auto p = random_params(cfg, 60 + trial);
    auto x = random_tensor<double>(Shape{2, 10, 39}, rng);
    const std::vector<std::size_t> lengths{10, 6};
    const auto r = random_tensor<double>(Shape{2, cfg.n_classes}, rng);
    const auto fp = forward_pass(x, cfg, p, lengths, true);
    const auto grads = backward(fp, r, cfg, p);
    const auto loss = [&] { return weighted_sum(forward_pass(x, cfg, p, lengths).logits, r); };
    // Biases and the head cover every code path at a fraction of the cost.
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i].rank() < 3 || i == p.gscb_base(cfg.n_gcb - 1, cfg.gating_levels - 1, 0))
        worst = std::max(worst, fd_max_rel_error(p[i], grads[i], loss));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("checkpoint round trip and validation", "[model][checkpoint]") {
  TempDir dir("ckpt");
  auto cfg = tiny(3, 2, 2, 4, 32);
  const auto p = ParamStore<float>::xavier(cfg, 9);
  KeyValues meta;
  meta.set("epoch", std::size_t{12});
  checkpoint_save(dir / "m.gmck", cfg, p, meta);
  const auto ck = checkpoint_load(dir / "m.gmck", cfg);
  CHECK(ck.config == cfg);
  CHECK(ck.params == p);
  CHECK(ck.meta.get("epoch", std::size_t{0}) == 12);

  Rng rng(1);
  FeatureMatrix fm{random_tensor<float>(Shape{32, 39}, rng), 32, "a"};
  CHECK(forward(fm, cfg, ck.params) == forward(fm, cfg, p));

  auto edited = cfg;
  edited.n_gcb = 4;
  CHECK_THROWS_AS(checkpoint_load(dir / "m.gmck", edited), ShapeError);

  auto bytes = gmtc::testing::slurp(dir / "m.gmck");
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 7;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), FormatError);

  // Config text claims more blocks than the stored tensors provide.
  const auto text = cfg.canonical_text();
  const auto pos = bytes.find("n_gcb=3");
  REQUIRE(pos != std::string::npos);
  auto forged = bytes;
  forged[pos + 6] = '4';
  CHECK_THROWS_AS(decode_checkpoint(forged), ShapeError);

  checkpoint_save(dir / "m2.gmck", cfg, p, meta);
  CHECK(gmtc::testing::slurp(dir / "m2.gmck") == bytes);
}
