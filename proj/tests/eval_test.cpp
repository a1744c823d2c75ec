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
#include <chrono>
#include <functional>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "maskscribe/error.h"
#include "maskscribe/eval.h"
#include "maskscribe/training.h"
#include "maskscribe/vocab.h"

using namespace maskscribe;
using namespace maskscribe::eval;

namespace {

// Exhaustive alignment: tries every match/substitute, delete and insert path.
std::size_t brute_force_edits(const std::vector<std::string>& r, std::size_t i,
                              const std::vector<std::string>& h, std::size_t j) {
  if (i == r.size()) return h.size() - j;
  if (j == h.size()) return r.size() - i;
  const std::size_t sub = (r[i] != h[j]) + brute_force_edits(r, i + 1, h, j + 1);
  const std::size_t del = 1 + brute_force_edits(r, i + 1, h, j);
  const std::size_t ins = 1 + brute_force_edits(r, i, h, j + 1);
  return std::min({sub, del, ins});
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

struct TinyModels {
  Denoiser<float> stage1, stage2;
  LengthPredictor<float> length;

  TinyModels() : stage1(config(), 1), stage2(config(), 2), length(lp_config(), 3) {
    stage1.set_trained_stage(1);
    stage2.set_trained_stage(2);
  }
  static DenoiserConfig config() {
    DenoiserConfig c;
    c.width = 16;
    c.heads = 2;
    c.ff_width = 32;
    return c;
  }
  static LengthPredictorConfig lp_config() {
    LengthPredictorConfig c;
    c.width = 16;
    c.heads = 2;
    c.ff_width = 32;
    return c;
  }
};

std::vector<synth::Sample> test_samples(std::size_t n, std::uint64_t seed = 31) {
  return synth::generate_split("test", n, synth::Grammar::standard(), synth::ChannelParams{}, 32,
                               seed);
}

}  // namespace

TEST_CASE("wer examples") {
  auto e = wer("the cat sat", "the cat sat");
  CHECK(e.errors() == 0);
  CHECK(e.ref_words == 3);
  CHECK(e.wer() == 0.0);

  e = wer("a b c", "a x c");
  CHECK(e.substitutions == 1);
  CHECK(e.deletions == 0);
  CHECK(e.insertions == 0);
  CHECK(e.wer() == doctest::Approx(100.0 / 3));

  e = wer("harvest contaminated tobacco", "harvested contaminated tobacco");
  CHECK(e.substitutions == 1);
  CHECK(e.ref_words == 3);

  e = wer("a b c", "a c");
  CHECK(e.deletions == 1);
  CHECK(e.errors() == 1);
  e = wer("a b", "x a b y");
  CHECK(e.insertions == 2);
  CHECK(e.errors() == 2);
  e = wer("a b", "");
  CHECK(e.deletions == 2);
  CHECK(e.wer() == 100.0);

  // Normalization: case, outer and repeated whitespace.
  CHECK(wer("  The  Cat ", "the cat").errors() == 0);
  CHECK_THROWS_AS(wer("   ", "x"), EvalError);
}

TEST_CASE("wer equals exhaustive alignment on short sentences") {
  Rng rng(8);
  const std::vector<std::string> pool = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> r(rng.uniform_int(1, 5)), h(rng.uniform_int(0, 5));
    for (auto& w : r) w = pool[rng.uniform_int(0, 3)];
    for (auto& w : h) w = pool[rng.uniform_int(0, 3)];
    const auto e = wer(join(r), join(h));
    REQUIRE(e.errors() == brute_force_edits(r, 0, h, 0));
    // Every alignment satisfies ref - deletions + insertions = hyp.
    CHECK(e.ref_words - e.deletions + e.insertions == h.size());
  }
}

TEST_CASE("corpus wer aggregates edits, not sample rates") {
  std::vector<WordEdits> edits = {wer("a", "b"), wer("a b c d", "a b c d")};
  CHECK(corpus_wer(edits) == doctest::Approx(20.0));
  CHECK(mean_sample_wer(edits) == doctest::Approx(50.0));
  CHECK_THROWS_AS(corpus_wer({}), EvalError);
}

TEST_CASE("length metrics") {
  auto m = length_metrics({3, 5}, {4, 5});
  CHECK(m.acc[0] == doctest::Approx(50.0));
  CHECK(m.acc[1] == doctest::Approx(100.0));
  CHECK(m.mae == doctest::Approx(0.5));
  m = length_metrics({7, 8, 9}, {7, 8, 9});
  CHECK(m.acc[0] == 100.0);
  CHECK(m.mae == 0.0);
  CHECK_THROWS_AS(length_metrics({1}, {1, 2}), UsageError);
  CHECK_THROWS_AS(length_metrics({}, {}), UsageError);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> p(20), t(20);
    for (std::size_t i = 0; i < 20; ++i) {
      p[i] = rng.uniform_int(1, 31);
      t[i] = rng.uniform_int(1, 31);
    }
    m = length_metrics(p, t);
    CHECK(m.acc[0] <= m.acc[1]);
    CHECK(m.acc[1] <= m.acc[2]);
    CHECK(m.acc[2] <= m.acc[3]);
  }
}

TEST_CASE("length predictor validation agrees with length_metrics") {
  const auto val = test_samples(150, 5);
  LengthPredictor<float> lp(TinyModels::lp_config(), 9);
  const auto v = validate_length_predictor(lp, val);
  const auto m = length_metrics(v.predictions, v.truths);
  CHECK(v.mae == m.mae);
  for (int w = 0; w < 4; ++w) CHECK(v.acc[w] == m.acc[w]);
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw EvalError("boom");
                               }),
                  EvalError);
  std::size_t calls = 0;
  parallel_for(5, 1, [&](std::size_t) { ++calls; });
  CHECK(calls == 5);
}

TEST_CASE("rtf with a controlled decoder") {
  std::vector<synth::Sample> samples(50);
  for (auto& s : samples) s.clip.frames.assign(40, 1);  // 0.04 s at 1000 frames/s
  std::size_t calls = 0;
  auto stub = [&](const synth::Sample& s) {
    ++calls;
    std::this_thread::sleep_for(
        std::chrono::duration<double>(0.5 * double(s.clip.frame_count()) / 1000.0));
  };
  const auto r = measure_rtf(stub, samples, 5, 1000.0);
  CHECK(calls == 50);
  CHECK(r.timed_samples == 45);
  CHECK(r.media_seconds == doctest::Approx(45 * 0.04));
  MESSAGE("stub RTF " << r.rtf);
  CHECK(r.rtf > 0.45);
  CHECK(r.rtf < 0.6);
  CHECK_THROWS_AS(measure_rtf(stub, std::vector<synth::Sample>(5), 5), UsageError);
  std::vector<synth::Sample> silent(7);
  CHECK_THROWS_AS(measure_rtf([](const synth::Sample&) {}, silent, 5), EvalError);
}

TEST_CASE("grid search") {
  TinyModels m;
  const auto val = test_samples(6, 3);
  DecodeConfig cfg;
  const auto cache = decode_candidate_cache(m.stage2, m.length, val, cfg, 1);
  const auto grid = grid_search_rerank(cache, val);
  REQUIRE(grid.lambdas.size() == 11);
  REQUIRE(grid.betas.size() == 11);
  REQUIRE(grid.wer.size() == 11);
  for (const auto& row : grid.wer) CHECK(row.size() == 11);
  CHECK(grid.lambdas[3] == 0.3);
  CHECK(grid.wer[0][0] == rerank_report("x", cache, val, 0.0, 0.0).wer);

  const auto fresh = grid_search_recompute(m.stage2, m.length, val, cfg, 1);
  CHECK(fresh.wer == grid.wer);
  CHECK(fresh.best_lambda == grid.best_lambda);
  CHECK(fresh.best_beta == grid.best_beta);

  // The best cell is a minimum, and the first one in lambda-major order.
  bool seen_best = false;
  for (std::size_t i = 0; i < 11; ++i) {
    for (std::size_t j = 0; j < 11; ++j) {
      CHECK(grid.wer[i][j] >= grid.best_wer);
      if (!seen_best && grid.wer[i][j] == grid.best_wer) {
        CHECK(grid.lambdas[i] == grid.best_lambda);
        CHECK(grid.betas[j] == grid.best_beta);
        seen_best = true;
      }
    }
  }

  // Sample order does not matter.
  auto rev = val;
  std::reverse(rev.begin(), rev.end());
  auto rev_cache = cache;
  std::reverse(rev_cache.candidates.begin(), rev_cache.candidates.end());
  std::reverse(rev_cache.predicted_lengths.begin(), rev_cache.predicted_lengths.end());
  CHECK(grid_search_rerank(rev_cache, rev).wer == grid.wer);

  std::ostringstream os;
  write_grid_csv(os, grid);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "lambda\\beta,0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
    ++rows;
  }
  CHECK(rows == 11);
  CHECK_THROWS_AS(grid_search_rerank(cache, {}), EvalError);
}

TEST_CASE("scenario runner") {
  TinyModels m;
  const auto test = test_samples(4);
  ScenarioConfig cfg;
  cfg.threads = 2;
  const auto all = run_scenarios({&m.stage1, &m.stage2, &m.length}, test, cfg);
  std::vector<std::string> names;
  for (const auto& r : all) names.push_back(r.scenario);
  const std::vector<std::string> expected = {
      "stage1_oracle",          "stage1_implicit",          "stage2_oracle",
      "stage2_implicit",        "stage2_rerank_lambda",     "stage2_rerank_lambda_beta",
      "stage2_implicit_block1", "stage2_implicit_block2",   "stage2_implicit_block4",
      "stage2_implicit_block8", "stage2_implicit_block16",  "stage2_implicit_block32"};
  CHECK(names == expected);
  for (const auto& r : all) CHECK(r.samples == 4);
  // Oracle rows decode the reference length.
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(all[0].records[i].length == test[i].length());
  }
  CHECK(all[4].length.has_value());
  // Block size 32 is the default implicit decode.
  CHECK(all.back().wer == all[3].wer);

  std::ostringstream log;
  cfg.log = &log;
  const auto partial = run_scenarios({nullptr, &m.stage2, nullptr}, test, cfg);
  CHECK(partial.size() == 2 + 6);
  CHECK(log.str().find("skipping stage1_oracle") != std::string::npos);
  CHECK_THROWS_AS(run_scenarios({&m.stage1, &m.stage2, &m.length}, {}, cfg), EvalError);

  std::ostringstream csv;
  write_reports_csv(csv, all);
  const std::string text = csv.str();
  CHECK(text.rfind("scenario,wer,samples,rtf,acc0,acc1,acc3,acc5,mae\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}

TEST_CASE("trace rendering") {
  using namespace maskscribe::vocab;
  CHECK(render_canvas({8, 5, kMask, 0, kEos, kPad}) == "he_ #.");
  TinyModels m;
  const auto s = test_samples(1).front();
  DecodeConfig cfg;
  cfg.block_size = 4;
  const auto r = decode_pinned(denoiser_probs(m.stage2, s.clip.frames), 32, s.length(), cfg);
  std::ostringstream os;
  emit_trace(os, s, r.trace, "block 4");
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.find(s.id) != std::string::npos);
  std::getline(in, line);
  CHECK(line == "reference: " + s.text);
  std::size_t last_masked = 33, steps = 0;
  std::string last;
  while (std::getline(in, line)) {
    const auto canvas = line.substr(line.find('|') + 1, 32);
    const auto masked = std::size_t(std::count(canvas.begin(), canvas.end(), '_'));
    CHECK(masked < last_masked);
    last_masked = masked;
    last = canvas;
    ++steps;
  }
  CHECK(steps == r.iterations + 1);
  CHECK(last.find('_') == std::string::npos);
}

TEST_CASE("viseme baseline") {
  std::vector<synth::Sample> train(1);
  train[0].text = "bob mop map mum";
  train[0].tokens = synth::tokenize(train[0].text);
  VisemeBaseline base(train);
  // p, b, m share a class: m (4) beats b (2) and p (2).
  CHECK(base.best_char(synth::viseme_of('b')) == 'm');
  CHECK(base.decode(synth::tokenize("pbm")) == "mmm");
  CHECK(base.decode(synth::tokenize(" ")) == " ");

  const auto data = test_samples(50);
  VisemeBaseline real(synth::generate_split("train", 500, synth::Grammar::standard(),
                                            synth::ChannelParams{}, 32, 1));
  const auto report = real.evaluate(data);
  CHECK(report.samples == 50);
  MESSAGE("viseme baseline WER " << report.wer);
  CHECK(report.wer > 0.0);
}
