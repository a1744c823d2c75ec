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

#include "maskscribe/decoder.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "maskscribe/vocab.h"

namespace maskscribe {
namespace {

struct Job {
  std::vector<int> cells;
  std::size_t limit = 0;
  const TokenFilter* allowed = nullptr;
  std::size_t block_begin = 0;
  std::vector<double> confidence;  // per cell, 0 until committed
  CandidateResult result;
};

// Masked cells of the current block, moving on past finished blocks.
std::vector<std::size_t> active_positions(Job& job, std::size_t block_size) {
  std::vector<std::size_t> active;
  while (job.block_begin < job.limit) {
    const std::size_t end = std::min(job.limit, job.block_begin + block_size);
    for (std::size_t i = job.block_begin; i < end; ++i) {
      if (job.cells[i] == vocab::kMask) active.push_back(i);
    }
    if (!active.empty()) break;
    job.block_begin = end;
  }
  return active;
}

void advance(Job& job, std::span<const double> probs, std::span<const std::size_t> active,
             const DecodeConfig& cfg) {
  const std::size_t vocab_size = probs.size() / job.cells.size();
  auto commits = commit_step(probs, vocab_size, job.cells, active, cfg.threshold, *job.allowed);
  ++job.result.iterations;
  for (const auto& c : commits) job.confidence[c.position] = c.confidence;
  job.result.trace.steps.push_back({job.result.iterations, std::move(commits), job.cells});
}

[[noreturn]] void iteration_limit(const Job& job, std::size_t max_iters) {
  std::string what = "decode";
  if (job.result.k > 0) what += " of candidate k=" + std::to_string(job.result.k);
  what += " did not finish within " + std::to_string(max_iters) + " iterations";
  throw DecodeLimitError(what, job.result.trace);
}

void run_jobs(const BatchProbs& probs, std::vector<Job>& jobs, const DecodeConfig& cfg,
              bool lockstep) {
  cfg.validate();
  const std::size_t t = jobs.empty() ? 0 : jobs.front().cells.size();
  const std::size_t max_iters = cfg.max_iters == 0 ? t : cfg.max_iters;

  auto run_group = [&](std::vector<Job*> group) {
    while (true) {
      std::vector<Job*> live;
      std::vector<std::vector<std::size_t>> active;
      for (Job* job : group) {
        auto a = active_positions(*job, cfg.block_size);
        if (a.empty()) continue;
        if (job->result.iterations >= max_iters) iteration_limit(*job, max_iters);
        live.push_back(job);
        active.push_back(std::move(a));
      }
      if (live.empty()) return;
      std::vector<std::vector<int>> canvases;
      for (Job* job : live) canvases.push_back(job->cells);
      const auto out = probs(canvases);
      if (out.size() != live.size()) throw ContractViolation("probability source lost canvases");
      for (std::size_t i = 0; i < live.size(); ++i) advance(*live[i], out[i], active[i], cfg);
    }
  };

  try {
    if (lockstep) {
      std::vector<Job*> all;
      for (auto& job : jobs) all.push_back(&job);
      run_group(all);
    } else {
      for (auto& job : jobs) run_group({&job});
    }
  } catch (const DecodeLimitError&) {
    throw;
  } catch (const Error& e) {
    throw DecodeError(std::string("decode failed: ") + e.what());
  }
}

Job make_job(const std::vector<int>& initial, std::size_t limit, const TokenFilter& allowed) {
  if (initial.empty()) throw ConfigError("empty canvas");
  if (limit > initial.size()) throw ConfigError("decode range exceeds the canvas");
  Job job;
  job.cells = initial;
  job.limit = limit;
  job.allowed = &allowed;
  job.confidence.assign(initial.size(), 0.0);
  job.result.trace.initial = initial;
  return job;
}

void finish(Job& job) {
  job.result.cells = job.cells;
  job.result.transcript.clear();
  job.result.confidences.clear();
}

std::vector<int> pinned_canvas(std::size_t t, std::size_t k) {
  if (k < 1 || k + 1 > t) {
    throw ConfigError("pinned length " + std::to_string(k) + " outside 1.." +
                      std::to_string(t - 1));
  }
  std::vector<int> cells(t, vocab::kPad);
  std::fill(cells.begin(), cells.begin() + k, vocab::kMask);
  cells[k] = vocab::kEos;
  return cells;
}

void finish_pinned(Job& job) {
  finish(job);
  const std::size_t k = job.result.k;
  job.result.transcript.assign(job.cells.begin(), job.cells.begin() + k);
  job.result.confidences.assign(job.confidence.begin(), job.confidence.begin() + k);
}

}  // namespace

void DecodeConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in (0, 1]");
  if (block_size == 0) throw ConfigError("block size must be at least 1");
  if (!(lambda >= 0.0) || !(beta >= 0.0)) throw ConfigError("rerank weights must be >= 0");
}

BatchProbs denoiser_probs(const Denoiser<float>& model, std::span<const int> frames) {
  auto cond = std::make_shared<CondSequence<float>>();
  {
    nn::NoGradGuard no_grad;
    *cond = model.encode({frames});
  }
  return [&model, cond](const std::vector<std::vector<int>>& canvases) {
    nn::NoGradGuard no_grad;
    const auto logits =
        model.logits(canvases, *cond, std::vector<std::size_t>(canvases.size(), 0));
    const std::size_t t = model.config().canvas_length, v = logits.cols();
    std::vector<std::vector<double>> out(canvases.size(), std::vector<double>(t * v));
    const auto data = logits.data();
    for (std::size_t b = 0; b < canvases.size(); ++b) {
      for (std::size_t r = 0; r < t; ++r) {
        const float* row = data.data() + (b * t + r) * v;
        double* dst = out[b].data() + r * v;
        double m = row[0];
        for (std::size_t c = 1; c < v; ++c) m = std::max(m, double(row[c]));
        double total = 0.0;
        for (std::size_t c = 0; c < v; ++c) total += dst[c] = std::exp(double(row[c]) - m);
        for (std::size_t c = 0; c < v; ++c) dst[c] /= total;
      }
    }
    return out;
  };
}

TokenFilter text_tokens() { return TokenFilter(vocab::kAlphabetSize, true); }

TokenFilter text_and_end_tokens() {
  TokenFilter f(vocab::kPad + 1, false);
  for (int i = 0; i < vocab::kAlphabetSize; ++i) f[i] = true;
  f[vocab::kEos] = true;
  f[vocab::kPad] = true;
  return f;
}

std::vector<Commit> commit_step(std::span<const double> probs, std::size_t vocab_size,
                                std::vector<int>& cells, std::span<const std::size_t> active,
                                double threshold, const TokenFilter& allowed) {
  if (vocab_size == 0 || probs.size() != cells.size() * vocab_size) {
    throw DimensionError("commit_step: probability table does not match the canvas");
  }
  std::vector<Commit> candidates;
  for (std::size_t pos : active) {
    if (pos >= cells.size()) throw IndexError("commit_step: position outside the canvas");
    if (cells[pos] != vocab::kMask) continue;
    const double* row = probs.data() + pos * vocab_size;
    int best = -1;
    for (std::size_t v = 0; v < vocab_size; ++v) {
      if (int(v) == vocab::kMask) continue;
      if (!allowed.empty() && (v >= allowed.size() || !allowed[v])) continue;
      if (best < 0 || row[v] > row[best]) best = int(v);
    }
    if (best < 0) throw ContractViolation("commit_step: no token is allowed");
    candidates.push_back({pos, best, row[best]});
  }
  if (candidates.empty()) throw ContractViolation("commit_step: no masked cell is active");
  std::sort(candidates.begin(), candidates.end(),
            [](const Commit& a, const Commit& b) { return a.position < b.position; });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const Commit& a, const Commit& b) {
                                 return a.position == b.position;
                               }),
                   candidates.end());

  std::vector<Commit> commits;
  for (const auto& c : candidates) {
    if (c.confidence > threshold) commits.push_back(c);
  }
  if (commits.empty()) {
    const Commit* best = &candidates.front();
    for (const auto& c : candidates) {
      if (c.confidence > best->confidence) best = &c;
    }
    commits.push_back(*best);
  }
  for (const auto& c : commits) cells[c.position] = c.token;
  return commits;
}

CandidateResult decode_blocks(const BatchProbs& probs, const std::vector<int>& initial,
                              std::size_t limit, const TokenFilter& allowed,
                              const DecodeConfig& cfg) {
  std::vector<Job> jobs;
  jobs.push_back(make_job(initial, limit, allowed));
  run_jobs(probs, jobs, cfg, false);
  finish(jobs.front());
  return std::move(jobs.front().result);
}

CandidateResult decode_implicit(const BatchProbs& probs, std::size_t canvas_length,
                                const DecodeConfig& cfg) {
  if (canvas_length < 2) throw ConfigError("canvas length must be at least 2");
  const TokenFilter allowed = text_and_end_tokens();
  std::vector<Job> jobs;
  jobs.push_back(make_job(std::vector<int>(canvas_length, vocab::kMask), canvas_length, allowed));
  run_jobs(probs, jobs, cfg, false);
  Job& job = jobs.front();
  finish(job);
  auto& r = job.result;
  r.no_eos = true;
  for (std::size_t i = 0; i < job.cells.size(); ++i) {
    const int tok = job.cells[i];
    if (tok == vocab::kEos) {
      r.no_eos = false;
      break;
    }
    if (vocab::is_text(tok)) {
      r.transcript.push_back(tok);
      r.confidences.push_back(job.confidence[i]);
    }
  }
  r.k = 0;
  return std::move(r);
}

CandidateResult decode_pinned(const BatchProbs& probs, std::size_t canvas_length, std::size_t k,
                              const DecodeConfig& cfg) {
  auto results = decode_candidates(probs, canvas_length, {{k, 1.0}}, cfg, false);
  return std::move(results.front());
}

std::vector<LengthHypothesis> build_length_window(const LengthPosterior& posterior,
                                                  std::size_t radius, std::size_t canvas_length) {
  const long center = long(posterior.predicted());
  const long lo = std::max(1L, center - long(radius));
  const long hi = std::min(long(canvas_length) - 1, center + long(radius));
  std::vector<LengthHypothesis> window;
  for (long k = lo; k <= hi; ++k) window.push_back({std::size_t(k), posterior.prob(k)});
  return window;
}

std::vector<CandidateResult> decode_candidates(const BatchProbs& probs,
                                               std::size_t canvas_length,
                                               const std::vector<LengthHypothesis>& window,
                                               const DecodeConfig& cfg, bool batched) {
  if (window.empty()) throw ConfigError("empty length window");
  const TokenFilter filter = text_tokens();
  std::vector<Job> jobs;
  jobs.reserve(window.size());
  for (const auto& h : window) {
    jobs.push_back(make_job(pinned_canvas(canvas_length, h.k), h.k, filter));
    jobs.back().result.k = h.k;
    jobs.back().result.length_prob = h.prob;
    jobs.back().result.trace.k = h.k;
  }
  run_jobs(probs, jobs, cfg, batched);
  std::vector<CandidateResult> results;
  for (auto& job : jobs) {
    finish_pinned(job);
    results.push_back(std::move(job.result));
  }
  return results;
}

double rerank_score(const CandidateResult& c, double lambda, double beta) {
  if (!(c.length_prob > 0.0)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double conf : c.confidences) s += std::log(conf);
  return s + lambda * std::log(c.length_prob) - beta * double(c.iterations);
}

std::size_t rerank_select(const std::vector<CandidateResult>& candidates, double lambda,
                          double beta) {
  if (candidates.empty()) throw RerankError("no candidates to rerank");
  std::size_t best = candidates.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = rerank_score(candidates[i], lambda, beta);
    if (s == -std::numeric_limits<double>::infinity()) continue;
    if (best == candidates.size() || s > best_score ||
        (s == best_score && candidates[i].k < candidates[best].k)) {
      best = i;
      best_score = s;
    }
  }
  if (best == candidates.size()) throw RerankError("every candidate has zero length probability");
  return best;
}

LengthGuidedResult decode_length_guided(const Denoiser<float>& model,
                                        const LengthPredictor<float>& length_model,
                                        std::span<const int> frames, const DecodeConfig& cfg,
                                        bool batched) {
  const auto posterior = length_model.posterior(frames);
  const std::size_t t = model.config().canvas_length;
  LengthGuidedResult out;
  out.predicted_length = posterior.predicted();
  const auto window = build_length_window(posterior, cfg.radius, t);
  if (window.empty()) {
    throw DecodeError("predicted length " + std::to_string(out.predicted_length) +
                      " is more than the radius beyond the canvas (T = " + std::to_string(t) +
                      "); is the length predictor built for a longer canvas?");
  }
  out.candidates = decode_candidates(denoiser_probs(model, frames), t, window, cfg, batched);
  for (auto& c : out.candidates) c.score = rerank_score(c, cfg.lambda, cfg.beta);
  out.chosen = rerank_select(out.candidates, cfg.lambda, cfg.beta);
  return out;
}

void write_trace(std::ostream& out, const DecodeTrace& trace) {
  char buf[32];
  for (const auto& step : trace.steps) {
    out << step.iteration << '\t' << trace.k << '\t';
    for (std::size_t i = 0; i < step.commits.size(); ++i) {
      out << (i ? "," : "") << step.commits[i].position;
    }
    out << '\t';
    for (std::size_t i = 0; i < step.commits.size(); ++i) {
      out << (i ? "," : "") << step.commits[i].token;
    }
    out << '\t';
    for (std::size_t i = 0; i < step.commits.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", step.commits[i].confidence);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

void write_trace(const DecodeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_trace(out, trace);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace maskscribe
