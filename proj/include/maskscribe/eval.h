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

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "maskscribe/decoder.h"
#include "maskscribe/model.h"
#include "maskscribe/synthdata.h"

namespace maskscribe::eval {

// Lowercase, trim, collapse runs of whitespace.
std::string normalize_text(const std::string& text);
std::vector<std::string> split_words(const std::string& text);

struct WordEdits {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_words = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double wer() const;  // percent
};

// Word-level Levenshtein alignment with unit costs. Among minimal
// alignments, prefers substitutions, then deletions. Throws EvalError on an
// empty reference.
WordEdits wer(const std::string& reference, const std::string& hypothesis);

// 100 * total edits / total reference words.
double corpus_wer(const std::vector<WordEdits>& edits);
// Mean of per-sample WERs, for comparison only.
double mean_sample_wer(const std::vector<WordEdits>& edits);

struct LengthMetrics {
  double acc[4] = {0, 0, 0, 0};  // percent within 0, 1, 3, 5 tokens
  double mae = 0.0;
};

inline constexpr int kLengthWindows[4] = {0, 1, 3, 5};

LengthMetrics length_metrics(const std::vector<std::size_t>& predictions,
                             const std::vector<std::size_t>& truths);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Each index runs exactly once; the first exception is
// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct RtfReport {
  double rtf = 0.0;
  std::size_t timed_samples = 0;
  double decode_seconds = 0.0;
  double media_seconds = 0.0;
};

// Serial wall-clock timing of `decode` on each sample after `warmup`
// untimed ones. Duration of a clip is frames / frame_rate.
RtfReport measure_rtf(const std::function<void(const synth::Sample&)>& decode,
                      const std::vector<synth::Sample>& samples, std::size_t warmup = 5,
                      double frame_rate = 25.0);

struct SampleRecord {
  std::string id;
  std::string reference;
  std::string hypothesis;
  WordEdits edits;
  std::size_t length = 0;      // decoded length (k* for candidate decoding)
  std::size_t iterations = 0;
  double score = 0.0;
  bool no_eos = false;
};

struct EvalReport {
  std::string scenario;
  double wer = 0.0;
  std::size_t samples = 0;
  std::vector<SampleRecord> records;
  std::optional<double> rtf;
  std::optional<LengthMetrics> length;
};

EvalReport summarize(std::string scenario, std::vector<SampleRecord> records);

SampleRecord make_record(const synth::Sample& sample, const CandidateResult& result);

EvalReport evaluate_oracle(const Denoiser<float>& model, const std::vector<synth::Sample>& samples,
                           const DecodeConfig& cfg, std::size_t threads = 0);
EvalReport evaluate_implicit(const Denoiser<float>& model,
                             const std::vector<synth::Sample>& samples, const DecodeConfig& cfg,
                             std::size_t threads = 0);

// Decoded length-guided candidates for every sample, kept so any (lambda,
// beta) can be scored without decoding again. Traces are dropped.
struct CandidateCache {
  std::vector<std::vector<CandidateResult>> candidates;
  std::vector<std::size_t> predicted_lengths;
};

CandidateCache decode_candidate_cache(const Denoiser<float>& model,
                                      const LengthPredictor<float>& length_model,
                                      const std::vector<synth::Sample>& samples,
                                      const DecodeConfig& cfg, std::size_t threads = 0);

EvalReport rerank_report(const std::string& scenario, const CandidateCache& cache,
                         const std::vector<synth::Sample>& samples, double lambda, double beta);

EvalReport evaluate_length_guided(const Denoiser<float>& model,
                                  const LengthPredictor<float>& length_model,
                                  const std::vector<synth::Sample>& samples,
                                  const DecodeConfig& cfg, std::size_t threads = 0);

struct GridResult {
  std::vector<double> lambdas;  // 0.0, 0.1, ..., 1.0
  std::vector<double> betas;
  std::vector<std::vector<double>> wer;  // wer[lambda index][beta index]
  double best_lambda = 0.0;
  double best_beta = 0.0;
  double best_wer = 0.0;

  // Best lambda among cells with beta = 0.
  double best_lambda_without_penalty() const;
};

// 11 x 11 grid over [0, 1]^2 with step 0.1. The minimum wins; ties go to
// the smaller lambda, then the smaller beta.
GridResult grid_search_rerank(const CandidateCache& cache,
                              const std::vector<synth::Sample>& samples);

// Same grid, decoding every sample afresh for every cell.
GridResult grid_search_recompute(const Denoiser<float>& model,
                                 const LengthPredictor<float>& length_model,
                                 const std::vector<synth::Sample>& samples,
                                 const DecodeConfig& cfg, std::size_t threads = 0);

// Rows are lambda values, columns beta values.
void write_grid_csv(std::ostream& out, const GridResult& grid);

struct ScenarioModels {
  const Denoiser<float>* stage1 = nullptr;
  const Denoiser<float>* stage2 = nullptr;
  const LengthPredictor<float>* length = nullptr;
};

struct ScenarioConfig {
  DecodeConfig decode;          // lambda and beta used by the full rerank row
  double lambda_only = 0.9;     // lambda of the rerank row without the penalty
  std::vector<std::size_t> block_sizes = {1, 2, 4, 8, 16, 32};
  std::size_t threads = 0;
  std::ostream* log = nullptr;  // warnings about skipped rows
};

// Rows: stage1 oracle, stage1 implicit, stage2 oracle, stage2 implicit,
// stage2 rerank (lambda), stage2 rerank (lambda, beta), then stage2
// implicit decoding for each block size. Rows whose models are missing are
// skipped.
std::vector<EvalReport> run_scenarios(const ScenarioModels& models,
                                      const std::vector<synth::Sample>& samples,
                                      const ScenarioConfig& cfg);

// Columns: scenario, wer, samples, rtf, acc0, acc1, acc3, acc5, mae.
void write_reports_csv(std::ostream& out, const std::vector<EvalReport>& reports);

// Canvas rendering for traces: '_' masked, '#' EOS, '.' PAD, letters and
// spaces as themselves.
std::string render_canvas(const std::vector<int>& cells);

// Step-by-step listing of one decode.
void emit_trace(std::ostream& out, const synth::Sample& sample, const DecodeTrace& trace,
                const std::string& label = {});
void emit_trace(const synth::Sample& sample, const DecodeTrace& trace,
                const std::filesystem::path& path, const std::string& label = {});

// Context-free baseline: each character of the transcript is replaced by
// the most frequent training character (unigram counts) sharing its viseme
// class. Uses the true transcript's viseme sequence and length.
class VisemeBaseline {
 public:
  explicit VisemeBaseline(const std::vector<synth::Sample>& train);

  char best_char(int viseme) const { return best_[viseme]; }
  std::string decode(const std::vector<int>& transcript) const;
  EvalReport evaluate(const std::vector<synth::Sample>& samples) const;

 private:
  std::vector<char> best_;
};

}  // namespace maskscribe::eval
