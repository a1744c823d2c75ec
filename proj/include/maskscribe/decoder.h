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
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "maskscribe/error.h"
#include "maskscribe/model.h"

namespace maskscribe {

struct DecodeConfig {
  double threshold = 0.9;       // commit cells whose confidence exceeds this
  std::size_t block_size = 32;  // 1 = left to right, >= T = fully parallel
  std::size_t radius = 5;       // length window K_pred - R .. K_pred + R
  double lambda = 0.9;          // weight of log P(k | v) in the rerank score
  double beta = 0.7;            // penalty per denoising iteration
  std::size_t max_iters = 0;    // 0 means T

  void validate() const;
};

// Row-major [T x V] token probabilities for each canvas in a batch. Row
// results must not depend on the other canvases in the batch.
using BatchProbs =
    std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

// Wraps a denoiser and one clip. The clip is encoded once.
BatchProbs denoiser_probs(const Denoiser<float>& model, std::span<const int> frames);

struct Commit {
  std::size_t position = 0;
  int token = 0;
  double confidence = 0.0;
};

// Token ids a decode may commit: id v is allowed if v < size() and
// filter[v]. An empty filter allows every id but MASK, which is never
// committed.
using TokenFilter = std::vector<bool>;
TokenFilter text_tokens();
TokenFilter text_and_end_tokens();

// One unmasking step. For each MASK cell among `active`, picks the most
// probable allowed token (lowest id on ties); its probability is the
// confidence. Commits every such cell above `threshold`, or else the single
// most confident one (lowest position on ties). Writes commits into `cells`
// and returns them by ascending position. Throws ContractViolation if no
// active cell is masked.
std::vector<Commit> commit_step(std::span<const double> probs, std::size_t vocab_size,
                                std::vector<int>& cells, std::span<const std::size_t> active,
                                double threshold, const TokenFilter& allowed = {});

struct TraceStep {
  std::size_t iteration = 0;  // 1-based
  std::vector<Commit> commits;
  std::vector<int> cells;     // canvas after this step
};

struct DecodeTrace {
  std::size_t k = 0;  // pinned length, 0 for implicit decoding
  std::vector<int> initial;
  std::vector<TraceStep> steps;
};

// Result of one decode over a canvas. For pinned decodes `k` is the pinned
// length and `transcript` has exactly k tokens; `confidences[i]` belongs to
// transcript position i.
struct CandidateResult {
  std::size_t k = 0;
  std::vector<int> cells;
  std::vector<int> transcript;
  std::vector<double> confidences;
  std::size_t iterations = 0;  // n_k
  double length_prob = 1.0;    // p_k
  double score = 0.0;
  bool no_eos = false;         // implicit decode that never committed EOS
  DecodeTrace trace;
};

// Thrown when a decode hits max_iters; carries the partial trace.
class DecodeLimitError : public DecodeError {
 public:
  DecodeLimitError(const std::string& what, DecodeTrace trace)
      : DecodeError(what), trace_(std::move(trace)) {}
  const DecodeTrace& trace() const { return trace_; }

 private:
  DecodeTrace trace_;
};

// Block-scheduled confidence decoding of `initial` over positions
// [0, limit): blocks of cfg.block_size are finished left to right.
CandidateResult decode_blocks(const BatchProbs& probs, const std::vector<int>& initial,
                              std::size_t limit, const TokenFilter& allowed,
                              const DecodeConfig& cfg);

// All-MASK canvas of length T; the model places EOS and PAD itself. The
// transcript is the text before the first EOS (PAD cells skipped).
CandidateResult decode_implicit(const BatchProbs& probs, std::size_t canvas_length,
                                const DecodeConfig& cfg);

// k MASK cells, EOS at position k, PAD after; only the first k cells decode.
CandidateResult decode_pinned(const BatchProbs& probs, std::size_t canvas_length, std::size_t k,
                              const DecodeConfig& cfg);

struct LengthHypothesis {
  std::size_t k = 0;
  double prob = 0.0;
};

// {K_pred - R .. K_pred + R} clipped to [1, T-1], with raw posterior values.
std::vector<LengthHypothesis> build_length_window(const LengthPosterior& posterior,
                                                  std::size_t radius, std::size_t canvas_length);

// One pinned decode per hypothesis. Batched mode advances all live
// candidates in lockstep through shared forward passes; results are
// bit-identical to the sequential mode.
std::vector<CandidateResult> decode_candidates(const BatchProbs& probs,
                                               std::size_t canvas_length,
                                               const std::vector<LengthHypothesis>& window,
                                               const DecodeConfig& cfg, bool batched = true);

// sum log c_i + lambda log p_k - beta n_k; -inf when p_k is 0.
double rerank_score(const CandidateResult& candidate, double lambda, double beta);

// Index of the best-scoring candidate; ties go to the smaller k. Throws
// RerankError if the list is empty or every score is -inf.
std::size_t rerank_select(const std::vector<CandidateResult>& candidates, double lambda,
                          double beta);

struct LengthGuidedResult {
  std::vector<CandidateResult> candidates;  // scores filled in
  std::size_t chosen = 0;
  std::size_t predicted_length = 0;

  const CandidateResult& best() const { return candidates[chosen]; }
};

LengthGuidedResult decode_length_guided(const Denoiser<float>& model,
                                        const LengthPredictor<float>& length_model,
                                        std::span<const int> frames, const DecodeConfig& cfg,
                                        bool batched = true);

// One line per iteration: iteration, k, positions, tokens, confidences
// (tab separated, lists comma separated, confidences to 6 decimals).
void write_trace(std::ostream& out, const DecodeTrace& trace);
void write_trace(const DecodeTrace& trace, const std::filesystem::path& path);

}  // namespace maskscribe
