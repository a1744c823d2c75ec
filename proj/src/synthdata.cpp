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

#include "maskscribe/synthdata.h"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "maskscribe/error.h"
#include "maskscribe/vocab.h"

namespace maskscribe::synth {
namespace {

// Class per character, indexed by token id (space first, then a..z).
//  0 space | 1 p b m | 2 f v | 3 t d | 4 n l | 5 s z c j | 6 k g q x
//  7 r w   | 8 a h   | 9 e   | 10 i y | 11 o u
constexpr std::array<int, vocab::kAlphabetSize> kVisemeTable = {
    0,                                // ' '
    8, 1, 5, 3, 9, 2, 6, 8, 10, 5,    // a b c d e f g h i j
    6, 4, 1, 4, 11, 1, 6, 7, 5, 3,    // k l m n o p q r s t
    11, 2, 7, 6, 10, 5,               // u v w x y z
};

int token_of(char c) {
  if (c == ' ') return vocab::kSpace;
  if (c >= 'a' && c <= 'z') return 1 + (c - 'a');
  throw VocabError(std::string("character outside the alphabet: '") + c + "'");
}

char char_of(int id) {
  if (!vocab::is_text(id)) throw VocabError("not a text token id: " + std::to_string(id));
  return id == vocab::kSpace ? ' ' : static_cast<char>('a' + id - 1);
}

template <typename Pairs>
int weighted_pick(const Pairs& weights, Rng& rng) {
  double total = 0;
  for (const auto& [id, w] : weights) total += w;
  double u = rng.uniform() * total;
  for (const auto& [id, w] : weights) {
    if (u < w) return id;
    u -= w;
  }
  return weights.back().first;
}

}  // namespace

std::vector<int> tokenize(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(token_of(c));
  return ids;
}

std::string detokenize(const std::vector<int>& ids) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(char_of(id));
  return out;
}

int viseme_of(char c) { return kVisemeTable[token_of(c)]; }

int viseme_of_token(int id) {
  if (!vocab::is_text(id)) throw VocabError("not a text token id: " + std::to_string(id));
  return kVisemeTable[id];
}

void validate(const ChannelParams& params) {
  if (!(params.noise >= 0.0 && params.noise <= 1.0)) {
    throw ConfigError("channel noise must be in [0, 1]");
  }
  if (params.jitter_min < 1 || params.jitter_max > 3 || params.jitter_min > params.jitter_max) {
    throw ConfigError("jitter range must satisfy 1 <= min <= max <= 3");
  }
  if (!(params.frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
}

VisemeClip render_clip(const std::vector<int>& transcript, const ChannelParams& params, Rng& rng) {
  validate(params);
  VisemeClip clip;
  for (int id : transcript) {
    const int cls = viseme_of_token(id);
    const auto repeats = rng.uniform_int(params.jitter_min, params.jitter_max);
    for (std::int64_t r = 0; r < repeats; ++r) {
      int frame = cls;
      if (rng.bernoulli(params.noise)) {
        frame = static_cast<int>(rng.uniform_int(0, kVisemeClasses - 1));
        ++clip.substitutions;
      }
      clip.frames.push_back(frame);
    }
  }
  return clip;
}

Grammar Grammar::standard() {
  Grammar g;
  g.words = {
    "the", "to", "of", "and", "in", "is", "it", "you", "that", "he", "was", "for", "on", "are",
    "with", "as", "his", "they", "be", "at", "one", "have", "this", "from", "or", "had", "by",
    "hot", "word", "but", "what", "some", "we", "can", "out", "other", "were", "all", "there",
    "when", "up", "use", "your", "how", "said", "an", "each", "she", "which", "do", "their",
    "time", "if", "will", "way", "about", "many", "then", "them", "write", "would", "like", "so",
    "these", "her", "long", "make", "thing", "see", "him", "two", "has", "look", "more", "day",
    "could", "go", "come", "did", "number", "sound", "no", "most", "people", "my", "over", "know",
    "water", "than", "call", "first", "who", "may", "down", "side", "been", "now", "find", "any",
    "new", "work", "part", "take", "get", "place", "made", "live", "where", "after", "back",
    "little", "only", "round", "man", "year", "came", "show", "every", "good", "me", "give",
    "our", "under", "name", "very", "through", "just", "form", "great", "think", "say", "help",
    "low", "line", "differ", "turn", "cause", "much", "mean", "before", "move", "right", "boy",
    "old", "too", "same", "tell", "does", "set", "three", "want", "air", "well", "also", "play",
    "small", "end", "put", "home", "read", "hand", "port", "large", "spell", "add", "even",
    "land", "here", "must", "big", "high", "such", "follow", "act", "why", "ask", "men", "change",
    "went", "light", "kind", "off", "need", "house", "picture", "try", "us", "again", "animal",
    "point", "mother", "world", "near", "build", "self", "earth", "father", "head", "stand",
    "own",
  };
  // Fixed construction seed: the grammar is part of the task definition.
  Rng rng(0x5eed'6a3a'3a3aULL);
  const int n = static_cast<int>(g.words.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  g.start_weights.assign(n, 0.0);
  for (int r = 0; r < n; ++r) g.start_weights[order[r]] = 1.0 / (r + 1);
  g.successors.resize(n);
  for (int w = 0; w < n; ++w) {
    rng.shuffle(order.begin(), order.end());
    for (int r = 0; r < 8; ++r) g.successors[w].emplace_back(order[r], 1.0 / (r + 1));
  }
  return g;
}

void Grammar::validate() const {
  if (words.empty()) throw ConfigError("grammar has no words");
  if (start_weights.size() != words.size() || successors.size() != words.size()) {
    throw ConfigError("grammar tables do not match the word list");
  }
  if (min_words < 1 || min_words > max_words) throw ConfigError("bad grammar word-count range");
  for (const auto& w : words) tokenize(w);
  for (const auto& next : successors) {
    if (next.empty()) throw ConfigError("every grammar word needs a successor");
    for (const auto& [id, weight] : next) {
      if (id < 0 || static_cast<std::size_t>(id) >= words.size() || weight < 0) {
        throw ConfigError("bad grammar successor entry");
      }
    }
  }
}

std::string sample_sentence(const Grammar& grammar, std::size_t max_chars, Rng& rng) {
  grammar.validate();
  std::vector<std::pair<int, double>> start;
  for (std::size_t i = 0; i < grammar.words.size(); ++i) {
    start.emplace_back(static_cast<int>(i), grammar.start_weights[i]);
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto count = rng.uniform_int(grammar.min_words, grammar.max_words);
    int word = weighted_pick(start, rng);
    std::string text = grammar.words[word];
    for (std::int64_t i = 1; i < count; ++i) {
      word = weighted_pick(grammar.successors[word], rng);
      text += ' ';
      text += grammar.words[word];
    }
    if (text.size() <= max_chars) return text;
  }
  throw ConfigError("grammar produced no sentence of at most " + std::to_string(max_chars) +
                    " characters in 1000 attempts");
}

std::vector<Sample> generate_split(const std::string& split, std::size_t count,
                                   const Grammar& grammar, const ChannelParams& channel,
                                   std::size_t canvas_length, std::uint64_t seed) {
  validate(channel);
  if (canvas_length < 2) throw ConfigError("canvas length must be at least 2");
  const std::uint64_t split_seed = derive_seed(seed, "data." + split);
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(split_seed, static_cast<std::uint64_t>(i)));
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%06zu", split.c_str(), i);
    s.id = id;
    s.text = sample_sentence(grammar, canvas_length - 1, rng);
    s.tokens = tokenize(s.text);
    s.clip = render_clip(s.tokens, channel, rng);
    out.push_back(std::move(s));
  }
  return out;
}

Dataset generate_dataset(const DatasetSizes& sizes, const Grammar& grammar,
                         const ChannelParams& channel, std::size_t canvas_length,
                         std::uint64_t seed) {
  Dataset d;
  d.train = generate_split("train", sizes.train, grammar, channel, canvas_length, seed);
  d.val = generate_split("val", sizes.val, grammar, channel, canvas_length, seed);
  d.test = generate_split("test", sizes.test, grammar, channel, canvas_length, seed);
  return d;
}

void write_split(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  for (const auto& s : samples) {
    out << s.id << '\t' << s.text << '\t';
    for (std::size_t i = 0; i < s.clip.frames.size(); ++i) {
      out << (i ? " " : "") << s.clip.frames[i];
    }
    out << '\t' << s.tokens.size() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Sample> read_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset file: " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) fail("expected 4 tab-separated fields");
    Sample s;
    s.id = fields[0];
    s.text = fields[1];
    try {
      s.tokens = tokenize(s.text);
    } catch (const VocabError& e) {
      fail(e.what());
    }
    std::istringstream frames(fields[2]);
    int f;
    while (frames >> f) {
      if (f < 0 || f >= kVisemeClasses) fail("frame class out of range");
      s.clip.frames.push_back(f);
    }
    if (!frames.eof()) fail("malformed frame list");
    if (s.clip.frames.empty()) fail("empty clip");
    std::size_t k = 0;
    try {
      k = std::stoul(fields[3]);
    } catch (const std::exception&) {
      fail("malformed K");
    }
    if (k != s.tokens.size()) fail("K disagrees with transcript length");
    if (k == 0) fail("empty transcript");
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_split(dataset.train, dir / "train.tsv");
  write_split(dataset.val, dir / "val.tsv");
  write_split(dataset.test, dir / "test.tsv");
}

}  // namespace maskscribe::synth
