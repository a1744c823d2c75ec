// Copyright 2026 The maskscribe Authors.
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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "maskscribe/error.h"
#include "maskscribe/model.h"
#include "maskscribe/nn/checkpoint.h"
#include "maskscribe/nn/grad_check.h"
#include "maskscribe/synthdata.h"
#include "maskscribe/vocab.h"

using namespace maskscribe;
using nn::Tensor;
using namespace maskscribe::vocab;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("maskscribe_model_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

DenoiserConfig small_denoiser() {
  DenoiserConfig c;
  c.canvas_length = 8;
  c.width = 16;
  c.heads = 2;
  c.ff_width = 32;
  c.blocks = 2;
  return c;
}

LengthPredictorConfig small_predictor() {
  LengthPredictorConfig c;
  c.width = 16;
  c.heads = 2;
  c.ff_width = 32;
  return c;
}

std::vector<int> masked_canvas(std::size_t t) { return std::vector<int>(t, kMask); }

const std::vector<int> kFrames = {1, 1, 8, 8, 3, 0, 0, 6, 11, 11, 4};

template <typename S>
bool same_bits(const Tensor<S>& a, const Tensor<S>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(S)) == 0;
}

template <typename S>
double max_row_diff(const Tensor<S>& a, const Tensor<S>& b, std::size_t row) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    m = std::max(m, std::abs(double(a.at(row, c)) - double(b.at(row, c))));
  }
  return m;
}

}  // namespace

TEST_CASE("block with all-zero parameters is the identity") {
  nn::ParamStore<double> store;
  Rng rng(3);
  auto p = register_block(store, "b", 8, 16, true, 1, rng);
  for (auto& e : store.entries()) {
    auto v = e.tensor.mutable_data();
    std::fill(v.begin(), v.end(), 0.0);
  }
  Rng data(4);
  std::vector<double> xv(5 * 8), cv(3 * 8);
  for (auto& v : xv) v = data.normal(0, 1);
  for (auto& v : cv) v = data.normal(0, 1);
  auto x = Tensor<double>::from({5, 8}, xv);
  auto c = Tensor<double>::from({3, 8}, cv);
  auto y = transformer_block_forward(x, c, p, 2);
  CHECK(same_bits(x, y));

  // A single-row sequence is a legal input.
  auto one = Tensor<double>::from({1, 8}, std::vector<double>(xv.begin(), xv.begin() + 8));
  CHECK(transformer_block_forward(one, c, p, 2).shape() == nn::Shape{1, 8});
}

TEST_CASE("block rejects a head count that does not divide the width") {
  nn::ParamStore<float> store;
  Rng rng(1);
  auto p = register_block(store, "b", 8, 16, false, 1, rng);
  auto x = Tensor<float>::filled({2, 8}, 0.5f);
  CHECK_THROWS_AS(transformer_block_forward(x, Tensor<float>(), p, 3), ConfigError);
}

TEST_CASE("conditioning encoder downsamples by two") {
  nn::ParamStore<float> store;
  Rng rng(5);
  CondEncoder<float> enc(store, "c", {12, 8, 4, true, 1, 0, 2, 16}, rng);
  std::vector<int> a = {1, 2, 3}, b = {4}, c = {5, 6, 7, 8, 9, 10, 11, 0};
  auto seq = enc.encode({a, b, c});
  CHECK(seq.lengths == std::vector<std::size_t>{2, 1, 4});
  CHECK(seq.offsets == std::vector<std::size_t>{0, 2, 3});
  CHECK(seq.features.shape() == nn::Shape{7, 8});
  std::vector<int> too_long(9, 1);
  CHECK_THROWS_AS(enc.encode({too_long}), ConfigError);
  std::vector<int> empty;
  CHECK_THROWS_AS(enc.encode({empty}), ConfigError);
  std::vector<int> bad = {12};
  CHECK_THROWS_AS(enc.encode({bad}), IndexError);
}

TEST_CASE("denoiser forward shape, determinism and batching") {
  const auto cfg = small_denoiser();
  Denoiser<float> m1(cfg, 11), m2(cfg, 11);
  auto canvas = masked_canvas(cfg.canvas_length);
  auto a = m1.forward(canvas, kFrames);
  auto b = m2.forward(canvas, kFrames);
  CHECK(a.shape() == nn::Shape{cfg.canvas_length, cfg.vocab_size});
  CHECK(same_bits(a, b));

  // Output shape does not depend on how many cells are masked.
  std::vector<int> partly = {8, 5, kMask, kMask, kEos, kPad, kPad, kPad};
  CHECK(m1.forward(partly, kFrames).shape() == a.shape());

  // A canvas inside a batch gets the same bits as on its own.
  std::vector<int> other = {3, 1, 2, 0, 7};
  auto cond = m1.encode({kFrames, other});
  auto batch = m1.logits({canvas, partly, canvas}, cond, {0, 0, 1});
  auto single = m1.forward(partly, kFrames);
  auto single_other = m1.forward(canvas, other);
  const std::size_t t = cfg.canvas_length, v = cfg.vocab_size;
  CHECK(std::memcmp(batch.data().data() + t * v, single.data().data(), t * v * sizeof(float)) == 0);
  CHECK(std::memcmp(batch.data().data() + 2 * t * v, single_other.data().data(),
                    t * v * sizeof(float)) == 0);

  Denoiser<float> m3(cfg, 12);
  CHECK_FALSE(same_bits(a, m3.forward(canvas, kFrames)));
}

TEST_CASE("denoiser attends both ways") {
  const auto cfg = small_denoiser();
  Denoiser<double> m(cfg, 21);
  std::vector<int> base = {8, 5, kMask, kMask, kEos, kPad, kPad, kPad};
  auto ref = m.forward(base, kFrames);

  auto changed = base;
  changed[0] = 20;  // committed text cell before the masks
  auto out = m.forward(changed, kFrames);
  CHECK(max_row_diff(ref, out, 2) > 1e-9);
  CHECK(max_row_diff(ref, out, 3) > 1e-9);

  auto pad = base;
  pad[7] = kMask;  // PAD cell after EOS
  out = m.forward(pad, kFrames);
  CHECK(max_row_diff(ref, out, 2) > 1e-9);
  CHECK(max_row_diff(ref, out, 0) > 1e-9);

  // The clip matters too.
  auto frames = kFrames;
  frames[0] = 2;
  out = m.forward(base, frames);
  CHECK(max_row_diff(ref, out, 2) > 1e-9);
}

TEST_CASE("denoiser input validation") {
  const auto cfg = small_denoiser();
  Denoiser<float> m(cfg, 1);
  CHECK_THROWS_AS(m.forward(masked_canvas(cfg.canvas_length + 1), kFrames), ConfigError);
  CHECK_THROWS_AS(m.forward(masked_canvas(cfg.canvas_length - 1), kFrames), ConfigError);
  auto bad = masked_canvas(cfg.canvas_length);
  bad[0] = 30;
  CHECK_THROWS_AS(m.forward(bad, kFrames), IndexError);
  auto heads = cfg;
  heads.heads = 3;
  CHECK_THROWS_AS(Denoiser<float>(heads, 1), ConfigError);
}

TEST_CASE("cross-attention reads conditioning rows as a set") {
  nn::ParamStore<double> store;
  Rng rng(8);
  auto p = register_block(store, "b", 8, 16, true, 1, rng);
  Rng data(9);
  std::vector<double> xv(4 * 8), cv(5 * 8);
  for (auto& v : xv) v = data.normal(0, 1);
  for (auto& v : cv) v = data.normal(0, 1);
  const std::vector<std::size_t> order = {3, 0, 4, 2, 1};
  std::vector<double> permuted;
  for (auto r : order) permuted.insert(permuted.end(), cv.begin() + r * 8, cv.begin() + r * 8 + 8);
  auto x = Tensor<double>::from({4, 8}, xv);
  auto a = transformer_block_forward(x, Tensor<double>::from({5, 8}, cv), p, 2);
  auto b = transformer_block_forward(x, Tensor<double>::from({5, 8}, permuted), p, 2);
  double diff = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) diff = std::max(diff, max_row_diff(a, b, r));
  CHECK(diff < 1e-12);
}

TEST_CASE("without positions or local mixing the clip is read as a set") {
  auto cfg = small_denoiser();
  cfg.positional = false;
  cfg.cond_window = 1;
  Denoiser<double> m(cfg, 5);
  // Swapping whole frame pairs permutes the conditioning rows.
  std::vector<int> frames = {1, 1, 8, 8, 3, 0, 6, 2};
  std::vector<int> swapped = {3, 0, 6, 2, 1, 1, 8, 8};
  std::vector<int> canvas = {8, kMask, kMask, kMask, kMask, kMask, kMask, kMask};
  auto a = m.forward(canvas, frames);
  auto b = m.forward(canvas, swapped);
  double diff = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) diff = std::max(diff, max_row_diff(a, b, r));
  CHECK(diff < 1e-9);
}

TEST_CASE("length predictor parameter count at full size") {
  const auto cfg = LengthPredictorConfig::full_size();
  LengthPredictor<float> lp(cfg, 1);
  const std::size_t d = cfg.width, f = cfg.ff_width;
  const std::size_t encoder = cfg.viseme_classes * d + (2 * d * d + d) +
                                (cfg.window * d * d + d) + (d * d + d) + 2 * d;
  const std::size_t layer = 4 * d + 4 * (d * d + d) + (d * f + f) + (f * d + d);
  const std::size_t expected = encoder + d + (cfg.max_cond_length + 1) * d + cfg.layers * layer +
                               2 * d + (d * cfg.max_length + cfg.max_length);
  CHECK(lp.params().parameter_count() == expected);
  MESSAGE("full-size length predictor parameters: " << expected);
  CHECK(expected > 3'500'000);
  CHECK(expected < 4'500'000);
}

TEST_CASE("length posterior") {
  LengthPredictor<float> lp(small_predictor(), 2);
  std::vector<int> other = {0, 0, 5};
  auto posts = lp.posteriors({kFrames, other});
  REQUIRE(posts.size() == 2);
  for (const auto& p : posts) {
    CHECK(p.max_length() == 31);
    double total = 0.0;
    for (double v : p.probs) total += v;
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
  auto single = lp.posterior(other);
  CHECK(single.probs == posts[1].probs);

  LengthPosterior tie{{0.1, 0.4, 0.1, 0.4}};
  CHECK(tie.predicted() == 2);
  CHECK(tie.prob(2) == doctest::Approx(0.4));
  CHECK(tie.prob(0) == 0.0);
  CHECK(tie.prob(5) == 0.0);

  // Dropout only in training mode.
  Rng r1(9);
  auto train = lp.logits({kFrames}, &r1);
  auto eval1 = lp.logits({kFrames});
  auto eval2 = lp.logits({kFrames});
  CHECK(same_bits(eval1, eval2));
  CHECK_FALSE(same_bits(train, eval1));
}

TEST_CASE("untrained length predictor is near chance") {
  const auto val = synth::generate_split("val", 400, synth::Grammar::standard(),
                                         synth::ChannelParams{}, 32, 77);
  LengthPredictor<float> lp(LengthPredictorConfig{}, 3);
  std::vector<std::span<const int>> clips;
  for (const auto& s : val) clips.push_back(s.clip.frames);
  const auto posts = lp.posteriors(clips);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const long diff = long(posts[i].predicted()) - long(val[i].length());
    hits += std::abs(diff) <= 5;
  }
  const double acc = double(hits) / val.size();
  // Best any input-blind guess can do: the heaviest 11-wide window of the
  // label histogram.
  std::vector<double> hist(32, 0.0);
  for (const auto& s : val) hist[s.length()] += 1.0 / val.size();
  double best = 0.0;
  for (long k = 1; k <= 31; ++k) {
    double mass = 0.0;
    for (long j = std::max(1L, k - 5); j <= std::min(31L, k + 5); ++j) mass += hist[j];
    best = std::max(best, mass);
  }
  MESSAGE("untrained Acc@5 " << acc << ", best constant guess " << best);
  CHECK(acc <= best + 0.02);
  CHECK(acc < 0.99);
}

TEST_CASE("model checkpoints") {
  const auto cfg = small_denoiser();
  Denoiser<float> m(cfg, 7);
  m.set_trained_stage(1);
  const auto p1 = temp_path("d1.ckpt"), p2 = temp_path("d2.ckpt");
  m.save(p1);
  auto loaded = Denoiser<float>::load(p1);
  loaded.save(p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.trained_stage() == 1);
  CHECK(loaded.config().width == cfg.width);
  auto canvas = masked_canvas(cfg.canvas_length);
  CHECK(same_bits(m.forward(canvas, kFrames), loaded.forward(canvas, kFrames)));

  // A stage-1 checkpoint loads into a fresh model for stage 2.
  Denoiser<float> fresh(cfg, 99);
  nn::load_into(fresh.params(), nn::read_checkpoint(p1));
  CHECK(same_bits(m.forward(canvas, kFrames), fresh.forward(canvas, kFrames)));

  // Unknown parameter name.
  auto ck = nn::read_checkpoint(p1);
  ck.entries.push_back({"blocks.9.extra", {2}, {0.f, 1.f}});
  nn::write_checkpoint(ck, p2);
  try {
    Denoiser<float>::load(p2);
    FAIL("unknown parameter accepted");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::kUnknownParameter);
  }

  LengthPredictor<float> lp(small_predictor(), 4);
  lp.save(p2);
  CHECK_THROWS_AS(Denoiser<float>::load(p2), CheckpointError);
  auto lp2 = LengthPredictor<float>::load(p2);
  CHECK(lp2.posterior(kFrames).probs == lp.posterior(kFrames).probs);
  CHECK(lp2.config().dropout == doctest::Approx(0.1));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("denoiser gradients match finite differences") {
  DenoiserConfig cfg;
  cfg.canvas_length = 8;
  cfg.vocab_size = 12;
  cfg.width = 16;
  cfg.heads = 2;
  cfg.ff_width = 32;
  cfg.blocks = 2;
  cfg.max_cond_length = 8;
  Denoiser<double> m(cfg, 13);
  // Push weights away from the tiny init so every path carries signal.
  Rng rng(14);
  for (auto& e : m.params().entries()) {
    for (auto& v : e.tensor.mutable_data()) v += rng.normal(0.0, 0.2);
  }
  const std::vector<int> canvas = {3, 11, 11, 5, 11, 1, 2, 0};
  const std::vector<int> frames = {1, 4, 4, 9, 0, 2, 7};
  const std::vector<int> targets = {3, 4, 6, 5, 8, 1, 2, 0};
  const std::vector<double> weights = {0, 1.5, 1.5, 0, 1.5, 0, 0, 0.5};
  auto report = nn::grad_check(
      [&] { return nn::cross_entropy(m.forward(canvas, frames), targets, weights); }, m.params());
  MESSAGE("denoiser grad check max relative error " << report.max_rel_error);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("length predictor gradients match finite differences") {
  LengthPredictorConfig cfg = small_predictor();
  cfg.width = 8;
  cfg.ff_width = 16;
  cfg.max_length = 6;
  cfg.max_cond_length = 8;
  LengthPredictor<double> lp(cfg, 15);
  Rng rng(16);
  for (auto& e : lp.params().entries()) {
    for (auto& v : e.tensor.mutable_data()) v += rng.normal(0.0, 0.2);
  }
  const std::vector<int> a = {1, 4, 4, 9, 0}, b = {2, 2, 7};
  auto report = nn::grad_check(
      [&] { return nn::cross_entropy(lp.logits({a, b}), {2, 4}, {1.0, 1.0}); }, lp.params());
  CHECK(report.passed);
}
