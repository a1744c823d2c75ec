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

#include "maskscribe/eval.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "maskscribe/error.h"
#include "maskscribe/vocab.h"

namespace maskscribe::eval {
namespace {

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Integer grid indices keep the 0.1 steps exact when compared or printed.
constexpr int kGridSteps = 10;
double grid_value(int i) { return double(i) / kGridSteps; }

GridResult make_grid() {
  GridResult g;
  for (int i = 0; i <= kGridSteps; ++i) {
    g.lambdas.push_back(grid_value(i));
    g.betas.push_back(grid_value(i));
  }
  g.wer.assign(g.lambdas.size(), std::vector<double>(g.betas.size(), 0.0));
  return g;
}

void pick_best(GridResult& g) {
  bool first = true;
  // Scan order is lambda-major ascending, so strict improvement keeps the
  // smaller lambda, then the smaller beta, on ties.
  for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
    for (std::size_t j = 0; j < g.betas.size(); ++j) {
      if (first || g.wer[i][j] < g.best_wer) {
        g.best_wer = g.wer[i][j];
        g.best_lambda = g.lambdas[i];
        g.best_beta = g.betas[j];
        first = false;
      }
    }
  }
}

}  // namespace

std::string normalize_text(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(normalize_text(text));
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

double WordEdits::wer() const {
  if (ref_words == 0) throw EvalError("WER is undefined for an empty reference");
  return 100.0 * double(errors()) / double(ref_words);
}

WordEdits wer(const std::string& reference, const std::string& hypothesis) {
  const auto ref = split_words(reference);
  const auto hyp = split_words(hypothesis);
  if (ref.empty()) throw EvalError("empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  WordEdits e;
  e.ref_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++e.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++e.deletions;
      --i;
    } else {
      ++e.insertions;
      --j;
    }
  }
  return e;
}

double corpus_wer(const std::vector<WordEdits>& edits) {
  std::size_t errors = 0, words = 0;
  for (const auto& e : edits) {
    errors += e.errors();
    words += e.ref_words;
  }
  if (words == 0) throw EvalError("no reference words");
  return 100.0 * double(errors) / double(words);
}

double mean_sample_wer(const std::vector<WordEdits>& edits) {
  if (edits.empty()) throw EvalError("no samples");
  double total = 0.0;
  for (const auto& e : edits) total += e.wer();
  return total / double(edits.size());
}

LengthMetrics length_metrics(const std::vector<std::size_t>& predictions,
                             const std::vector<std::size_t>& truths) {
  if (predictions.size() != truths.size()) {
    throw UsageError("length_metrics: " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(truths.size()) + " truths");
  }
  if (truths.empty()) throw UsageError("length_metrics: no samples");
  LengthMetrics m;
  std::size_t hits[4] = {0, 0, 0, 0};
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const long diff = std::labs(long(predictions[i]) - long(truths[i]));
    abs_sum += double(diff);
    for (int w = 0; w < 4; ++w) hits[w] += diff <= kLengthWindows[w];
  }
  for (int w = 0; w < 4; ++w) m.acc[w] = 100.0 * double(hits[w]) / double(truths.size());
  m.mae = abs_sum / double(truths.size());
  return m;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RtfReport measure_rtf(const std::function<void(const synth::Sample&)>& decode,
                      const std::vector<synth::Sample>& samples, std::size_t warmup,
                      double frame_rate) {
  if (samples.size() <= warmup) {
    throw UsageError("RTF needs more than " + std::to_string(warmup) + " samples");
  }
  if (!(frame_rate > 0.0)) throw EvalError("frame rate must be positive");
  RtfReport r;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i < warmup) {
      decode(samples[i]);
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    decode(samples[i]);
    const auto stop = std::chrono::steady_clock::now();
    r.decode_seconds += std::chrono::duration<double>(stop - start).count();
    r.media_seconds += double(samples[i].clip.frame_count()) / frame_rate;
    ++r.timed_samples;
  }
  if (!(r.media_seconds > 0.0)) throw EvalError("timed samples have zero total duration");
  r.rtf = r.decode_seconds / r.media_seconds;
  return r;
}

EvalReport summarize(std::string scenario, std::vector<SampleRecord> records) {
  EvalReport r;
  r.scenario = std::move(scenario);
  r.samples = records.size();
  std::vector<WordEdits> edits;
  for (const auto& rec : records) edits.push_back(rec.edits);
  r.wer = corpus_wer(edits);
  r.records = std::move(records);
  return r;
}

SampleRecord make_record(const synth::Sample& sample, const CandidateResult& result) {
  SampleRecord rec;
  rec.id = sample.id;
  rec.reference = normalize_text(sample.text);
  rec.hypothesis = normalize_text(synth::detokenize(result.transcript));
  rec.edits = wer(rec.reference, rec.hypothesis);
  rec.length = result.transcript.size();
  rec.iterations = result.iterations;
  rec.score = result.score;
  rec.no_eos = result.no_eos;
  return rec;
}

EvalReport evaluate_oracle(const Denoiser<float>& model, const std::vector<synth::Sample>& samples,
                           const DecodeConfig& cfg, std::size_t threads) {
  if (samples.empty()) throw EvalError("no samples to evaluate");
  std::vector<SampleRecord> records(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    records[i] = make_record(s, decode_pinned(denoiser_probs(model, s.clip.frames),
                                              model.config().canvas_length, s.length(), cfg));
  });
  return summarize("oracle", std::move(records));
}

EvalReport evaluate_implicit(const Denoiser<float>& model,
                             const std::vector<synth::Sample>& samples, const DecodeConfig& cfg,
                             std::size_t threads) {
  if (samples.empty()) throw EvalError("no samples to evaluate");
  std::vector<SampleRecord> records(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    records[i] = make_record(s, decode_implicit(denoiser_probs(model, s.clip.frames),
                                                model.config().canvas_length, cfg));
  });
  return summarize("implicit", std::move(records));
}

CandidateCache decode_candidate_cache(const Denoiser<float>& model,
                                      const LengthPredictor<float>& length_model,
                                      const std::vector<synth::Sample>& samples,
                                      const DecodeConfig& cfg, std::size_t threads) {
  CandidateCache cache;
  cache.candidates.resize(samples.size());
  cache.predicted_lengths.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    auto r = decode_length_guided(model, length_model, samples[i].clip.frames, cfg);
    for (auto& c : r.candidates) c.trace = {};
    cache.candidates[i] = std::move(r.candidates);
    cache.predicted_lengths[i] = r.predicted_length;
  });
  return cache;
}

EvalReport rerank_report(const std::string& scenario, const CandidateCache& cache,
                         const std::vector<synth::Sample>& samples, double lambda, double beta) {
  if (samples.empty()) throw EvalError("no samples to evaluate");
  if (cache.candidates.size() != samples.size()) {
    throw UsageError("candidate cache does not match the samples");
  }
  std::vector<SampleRecord> records;
  std::vector<std::size_t> truths;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& cands = cache.candidates[i];
    CandidateResult best = cands[rerank_select(cands, lambda, beta)];
    best.score = rerank_score(best, lambda, beta);
    records.push_back(make_record(samples[i], best));
    truths.push_back(samples[i].length());
  }
  auto report = summarize(scenario, std::move(records));
  report.length = length_metrics(cache.predicted_lengths, truths);
  return report;
}

EvalReport evaluate_length_guided(const Denoiser<float>& model,
                                  const LengthPredictor<float>& length_model,
                                  const std::vector<synth::Sample>& samples,
                                  const DecodeConfig& cfg, std::size_t threads) {
  if (samples.empty()) throw EvalError("no samples to evaluate");
  const auto cache = decode_candidate_cache(model, length_model, samples, cfg, threads);
  return rerank_report("length_guided", cache, samples, cfg.lambda, cfg.beta);
}

double GridResult::best_lambda_without_penalty() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    if (wer[i][0] < wer[best][0]) best = i;
  }
  return lambdas[best];
}

GridResult grid_search_rerank(const CandidateCache& cache,
                              const std::vector<synth::Sample>& samples) {
  if (samples.empty()) throw EvalError("grid search needs validation samples");
  GridResult g = make_grid();
  for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
    for (std::size_t j = 0; j < g.betas.size(); ++j) {
      g.wer[i][j] = rerank_report("grid", cache, samples, g.lambdas[i], g.betas[j]).wer;
    }
  }
  pick_best(g);
  return g;
}

GridResult grid_search_recompute(const Denoiser<float>& model,
                                 const LengthPredictor<float>& length_model,
                                 const std::vector<synth::Sample>& samples,
                                 const DecodeConfig& cfg, std::size_t threads) {
  if (samples.empty()) throw EvalError("grid search needs validation samples");
  GridResult g = make_grid();
  for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
    for (std::size_t j = 0; j < g.betas.size(); ++j) {
      DecodeConfig cell = cfg;
      cell.lambda = g.lambdas[i];
      cell.beta = g.betas[j];
      std::vector<SampleRecord> records(samples.size());
      parallel_for(samples.size(), threads, [&](std::size_t s) {
        const auto r = decode_length_guided(model, length_model, samples[s].clip.frames, cell);
        records[s] = make_record(samples[s], r.best());
      });
      g.wer[i][j] = summarize("grid", std::move(records)).wer;
    }
  }
  pick_best(g);
  return g;
}

void write_grid_csv(std::ostream& out, const GridResult& grid) {
  out << "lambda\\beta";
  for (double b : grid.betas) out << ',' << format_fixed(b, 1);
  out << '\n';
  for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
    out << format_fixed(grid.lambdas[i], 1);
    for (double w : grid.wer[i]) out << ',' << format_fixed(w, 4);
    out << '\n';
  }
}

std::vector<EvalReport> run_scenarios(const ScenarioModels& models,
                                      const std::vector<synth::Sample>& samples,
                                      const ScenarioConfig& cfg) {
  if (samples.empty()) throw EvalError("no test samples");
  std::vector<EvalReport> out;
  auto skip = [&](const std::string& row, const std::string& missing) {
    if (cfg.log) *cfg.log << "warning: skipping " << row << " (no " << missing << ")\n";
  };
  auto add = [&](EvalReport r, const std::string& name) {
    r.scenario = name;
    out.push_back(std::move(r));
  };
  if (models.stage1) {
    add(evaluate_oracle(*models.stage1, samples, cfg.decode, cfg.threads), "stage1_oracle");
    add(evaluate_implicit(*models.stage1, samples, cfg.decode, cfg.threads), "stage1_implicit");
  } else {
    skip("stage1_oracle", "stage-1 checkpoint");
    skip("stage1_implicit", "stage-1 checkpoint");
  }
  if (models.stage2) {
    add(evaluate_oracle(*models.stage2, samples, cfg.decode, cfg.threads), "stage2_oracle");
    add(evaluate_implicit(*models.stage2, samples, cfg.decode, cfg.threads), "stage2_implicit");
  } else {
    skip("stage2_oracle", "stage-2 checkpoint");
    skip("stage2_implicit", "stage-2 checkpoint");
  }
  if (models.stage2 && models.length) {
    const auto cache =
        decode_candidate_cache(*models.stage2, *models.length, samples, cfg.decode, cfg.threads);
    add(rerank_report("", cache, samples, cfg.lambda_only, 0.0), "stage2_rerank_lambda");
    add(rerank_report("", cache, samples, cfg.decode.lambda, cfg.decode.beta),
        "stage2_rerank_lambda_beta");
  } else {
    skip("stage2_rerank_lambda", "stage-2 checkpoint or length predictor");
    skip("stage2_rerank_lambda_beta", "stage-2 checkpoint or length predictor");
  }
  for (std::size_t block : cfg.block_sizes) {
    const std::string name = "stage2_implicit_block" + std::to_string(block);
    if (!models.stage2) {
      skip(name, "stage-2 checkpoint");
      continue;
    }
    DecodeConfig d = cfg.decode;
    d.block_size = block;
    add(evaluate_implicit(*models.stage2, samples, d, cfg.threads), name);
  }
  return out;
}

void write_reports_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "scenario,wer,samples,rtf,acc0,acc1,acc3,acc5,mae\n";
  for (const auto& r : reports) {
    out << r.scenario << ',' << format_fixed(r.wer, 4) << ',' << r.samples << ',';
    if (r.rtf) out << format_fixed(*r.rtf, 6);
    for (int w = 0; w < 4; ++w) {
      out << ',';
      if (r.length) out << format_fixed(r.length->acc[w], 2);
    }
    out << ',';
    if (r.length) out << format_fixed(r.length->mae, 4);
    out << '\n';
  }
}

std::string render_canvas(const std::vector<int>& cells) {
  std::string out;
  for (int tok : cells) {
    switch (tok) {
      case vocab::kMask: out.push_back('_'); break;
      case vocab::kEos: out.push_back('#'); break;
      case vocab::kPad: out.push_back('.'); break;
      default: out += synth::detokenize({tok});
    }
  }
  return out;
}

void emit_trace(std::ostream& out, const synth::Sample& sample, const DecodeTrace& trace,
                const std::string& label) {
  out << "sample " << sample.id;
  if (!label.empty()) out << " (" << label << ")";
  if (trace.k > 0) out << " k=" << trace.k;
  out << "\nreference: " << sample.text << "\n";
  out << "step  0 |" << render_canvas(trace.initial) << "|\n";
  char buf[16];
  for (const auto& step : trace.steps) {
    std::snprintf(buf, sizeof buf, "step %2zu |", step.iteration);
    out << buf << render_canvas(step.cells) << "|";
    for (const auto& c : step.commits) {
      out << ' ' << c.position << ':' << render_canvas({c.token}) << '@'
          << format_fixed(c.confidence, 3);
    }
    out << '\n';
  }
}

void emit_trace(const synth::Sample& sample, const DecodeTrace& trace,
                const std::filesystem::path& path, const std::string& label) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  emit_trace(out, sample, trace, label);
  if (!out) throw IoError("write failed: " + path.string());
}

VisemeBaseline::VisemeBaseline(const std::vector<synth::Sample>& train)
    : best_(synth::kVisemeClasses, '?') {
  std::vector<std::size_t> counts(vocab::kAlphabetSize, 0);
  for (const auto& s : train) {
    for (int tok : s.tokens) ++counts[tok];
  }
  std::vector<long> best_count(synth::kVisemeClasses, -1);
  for (int tok = 0; tok < vocab::kAlphabetSize; ++tok) {
    const int v = synth::viseme_of_token(tok);
    if (long(counts[tok]) > best_count[v]) {
      best_count[v] = long(counts[tok]);
      best_[v] = synth::detokenize({tok})[0];
    }
  }
}

std::string VisemeBaseline::decode(const std::vector<int>& transcript) const {
  std::string out;
  for (int tok : transcript) out.push_back(best_[synth::viseme_of_token(tok)]);
  return out;
}

EvalReport VisemeBaseline::evaluate(const std::vector<synth::Sample>& samples) const {
  if (samples.empty()) throw EvalError("no samples to evaluate");
  std::vector<SampleRecord> records;
  for (const auto& s : samples) {
    SampleRecord rec;
    rec.id = s.id;
    rec.reference = normalize_text(s.text);
    rec.hypothesis = normalize_text(decode(s.tokens));
    rec.edits = wer(rec.reference, rec.hypothesis);
    rec.length = s.length();
    records.push_back(std::move(rec));
  }
  return summarize("viseme_baseline", std::move(records));
}

}  // namespace maskscribe::eval
