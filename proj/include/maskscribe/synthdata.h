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
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maskscribe/rng.h"

namespace maskscribe::synth {

// Number of viseme classes the alphabet collapses onto.
inline constexpr int kVisemeClasses = 12;

// Character-level tokenizer over ' ' and 'a'..'z'. Throws VocabError on any
// other character; never produces reserved ids.
std::vector<int> tokenize(std::string_view text);
std::string detokenize(const std::vector<int>& ids);

// Deterministic many-to-one map from a character onto its viseme class.
// The space has a class of its own; {p, b, m} share one.
int viseme_of(char c);
int viseme_of_token(int id);

struct VisemeClip {
  std::vector<int> frames;  // one class id per raw frame
  std::size_t substitutions = 0;  // frames whose class was redrawn by the noise

  std::size_t frame_count() const { return frames.size(); }
};

struct ChannelParams {
  double noise = 0.05;   // per-frame probability of redrawing the class uniformly
  int jitter_min = 1;    // frames emitted per character, inclusive range
  int jitter_max = 3;
  double frame_rate = 25.0;
};

void validate(const ChannelParams& params);

// Renders a token sequence through the noisy viseme channel. Each character
// emits uniform{jitter_min..jitter_max} frames of its class; each frame is
// then, with probability `noise`, replaced by a class drawn uniformly from
// all kVisemeClasses.
VisemeClip render_clip(const std::vector<int>& transcript, const ChannelParams& params, Rng& rng);

// Word list plus a bigram chain: sentences start from `start_weights`
// and follow `successors`.
struct Grammar {
  std::vector<std::string> words;
  std::vector<double> start_weights;
  std::vector<std::vector<std::pair<int, double>>> successors;
  int min_words = 2;
  int max_words = 5;

  // 200 common words; each word gets 8 successors with 1/rank weights.
  static Grammar standard();
  void validate() const;
};

// Draws uniform{min_words..max_words} words along the chain and joins them
// with single spaces, resampling until the text fits in `max_chars`.
// Throws ConfigError after 1000 failed attempts.
std::string sample_sentence(const Grammar& grammar, std::size_t max_chars, Rng& rng);

struct Sample {
  std::string id;
  std::string text;
  std::vector<int> tokens;
  VisemeClip clip;

  std::size_t length() const { return tokens.size(); }  // K
};

struct DatasetSizes {
  std::size_t train = 20000;
  std::size_t val = 1000;
  std::size_t test = 1000;
};

// Seeds each split from a named sub-stream of `seed` and each sample from
// (split seed, index), so output does not depend on generation order.
std::vector<Sample> generate_split(const std::string& split, std::size_t count,
                                   const Grammar& grammar, const ChannelParams& channel,
                                   std::size_t canvas_length, std::uint64_t seed);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

Dataset generate_dataset(const DatasetSizes& sizes, const Grammar& grammar,
                         const ChannelParams& channel, std::size_t canvas_length,
                         std::uint64_t seed);

// Line format: id \t transcript \t space-separated frame classes \t K
void write_split(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_split(const std::filesystem::path& path);

// Writes train.tsv, val.tsv and test.tsv into `dir` (created if missing).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace maskscribe::synth
