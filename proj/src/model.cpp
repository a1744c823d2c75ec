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

#include "maskscribe/model.h"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "maskscribe/error.h"
#include "maskscribe/nn/checkpoint.h"

namespace maskscribe {
namespace {

using nn::Shape;
using nn::Tensor;

constexpr double kInitStd = 0.02;

template <typename S>
std::vector<S> normal_init(std::size_t n, double stddev, Rng& rng) {
  std::vector<S> v(n);
  for (auto& x : v) x = static_cast<S>(rng.normal(0.0, stddev));
  return v;
}

template <typename S>
Tensor<S> add_normal(nn::ParamStore<S>& store, const std::string& name, Shape shape,
                     double stddev, Rng& rng) {
  const std::size_t n = nn::shape_size(shape);
  return store.add(name, std::move(shape), normal_init<S>(n, stddev, rng));
}

template <typename S>
Tensor<S> add_const(nn::ParamStore<S>& store, const std::string& name, Shape shape, S value) {
  const std::size_t n = nn::shape_size(shape);
  return store.add(name, std::move(shape), std::vector<S>(n, value));
}

// Sinusoidal table scaled to a per-element RMS of `rms`.
template <typename S>
Tensor<S> add_sinusoid(nn::ParamStore<S>& store, const std::string& name, std::size_t rows,
                       std::size_t width, double rms) {
  std::vector<S> v(rows * width);
  const double amp = rms * std::sqrt(2.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -double(i / 2 * 2) / double(width));
      const double a = double(r) * freq;
      v[r * width + i] = S(amp * (i % 2 == 0 ? std::sin(a) : std::cos(a)));
    }
  }
  return store.add(name, {rows, width}, std::move(v));
}

// Position tables start as sinusoids so alignment is visible from step 0.
constexpr double kCondPosRms = 1.0;
constexpr double kTokenPosRms = 0.3;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::size_t meta_size(const Meta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ConfigError("checkpoint meta lacks '" + key + "'");
  try {
    return std::stoul(it->second);
  } catch (const std::exception&) {
    throw ConfigError("checkpoint meta '" + key + "' is not an integer");
  }
}

double meta_double(const Meta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ConfigError("checkpoint meta lacks '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("checkpoint meta '" + key + "' is not a number");
  }
}

void expect_kind(const Meta& meta, const std::string& kind) {
  auto it = meta.find("model");
  if (it == meta.end() || it->second != kind) {
    throw CheckpointError(CheckpointError::Kind::kCorruptManifest,
                          "checkpoint is not a " + kind + " checkpoint");
  }
}

template <typename S>
Tensor<S> maybe_dropout(const Tensor<S>& x, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  return nn::dropout(x, p, *rng);
}

}  // namespace

template <typename S>
BlockParams<S> register_block(nn::ParamStore<S>& store, const std::string& prefix,
                              std::size_t width, std::size_t ff_width, bool cross,
                              std::size_t depth, Rng& rng) {
  const std::size_t d = width;
  // Residual output projections shrink with depth.
  const double out_std = kInitStd / std::sqrt(2.0 * static_cast<double>(depth));
  BlockParams<S> p;
  p.ln1_gain = add_const<S>(store, prefix + ".ln1.gain", {d}, S(1));
  p.ln1_bias = add_const<S>(store, prefix + ".ln1.bias", {d}, S(0));
  p.q_w = add_normal(store, prefix + ".self.q.w", {d, d}, kInitStd, rng);
  p.q_b = add_const<S>(store, prefix + ".self.q.b", {d}, S(0));
  p.k_w = add_normal(store, prefix + ".self.k.w", {d, d}, kInitStd, rng);
  p.k_b = add_const<S>(store, prefix + ".self.k.b", {d}, S(0));
  p.v_w = add_normal(store, prefix + ".self.v.w", {d, d}, kInitStd, rng);
  p.v_b = add_const<S>(store, prefix + ".self.v.b", {d}, S(0));
  p.o_w = add_normal(store, prefix + ".self.o.w", {d, d}, out_std, rng);
  p.o_b = add_const<S>(store, prefix + ".self.o.b", {d}, S(0));
  p.has_cross = cross;
  if (cross) {
    p.lnc_gain = add_const<S>(store, prefix + ".lnc.gain", {d}, S(1));
    p.lnc_bias = add_const<S>(store, prefix + ".lnc.bias", {d}, S(0));
    p.cq_w = add_normal(store, prefix + ".cross.q.w", {d, d}, kInitStd, rng);
    p.cq_b = add_const<S>(store, prefix + ".cross.q.b", {d}, S(0));
    p.ck_w = add_normal(store, prefix + ".cross.k.w", {d, d}, kInitStd, rng);
    p.ck_b = add_const<S>(store, prefix + ".cross.k.b", {d}, S(0));
    p.cv_w = add_normal(store, prefix + ".cross.v.w", {d, d}, kInitStd, rng);
    p.cv_b = add_const<S>(store, prefix + ".cross.v.b", {d}, S(0));
    p.co_w = add_normal(store, prefix + ".cross.o.w", {d, d}, out_std, rng);
    p.co_b = add_const<S>(store, prefix + ".cross.o.b", {d}, S(0));
  }
  p.ln2_gain = add_const<S>(store, prefix + ".ln2.gain", {d}, S(1));
  p.ln2_bias = add_const<S>(store, prefix + ".ln2.bias", {d}, S(0));
  p.ff1_w = add_normal(store, prefix + ".ff1.w", {d, ff_width}, kInitStd, rng);
  p.ff1_b = add_const<S>(store, prefix + ".ff1.b", {ff_width}, S(0));
  p.ff2_w = add_normal(store, prefix + ".ff2.w", {ff_width, d}, out_std, rng);
  p.ff2_b = add_const<S>(store, prefix + ".ff2.b", {d}, S(0));
  return p;
}

template <typename S>
Tensor<S> transformer_block_forward(const Tensor<S>& x, const Tensor<S>* cond,
                                    const BlockParams<S>& p, std::size_t heads,
                                    const std::vector<nn::AttentionSegment>& self_segments,
                                    const std::vector<nn::AttentionSegment>& cross_segments,
                                    double dropout, Rng* rng) {
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  Tensor<S> h = nn::layer_norm(x, p.ln1_gain, p.ln1_bias);
  Tensor<S> a = nn::attention(nn::linear(h, p.q_w, p.q_b), nn::linear(h, p.k_w, p.k_b),
                              nn::linear(h, p.v_w, p.v_b), heads, self_segments);
  Tensor<S> out = nn::add(x, maybe_dropout(nn::linear(a, p.o_w, p.o_b), dropout, rng));
  if (p.has_cross) {
    if (cond == nullptr || !cond->defined()) {
      throw UsageError("cross-attention block needs a conditioning sequence");
    }
    h = nn::layer_norm(out, p.lnc_gain, p.lnc_bias);
    a = nn::attention(nn::linear(h, p.cq_w, p.cq_b), nn::linear(*cond, p.ck_w, p.ck_b),
                      nn::linear(*cond, p.cv_w, p.cv_b), heads, cross_segments);
    out = nn::add(out, maybe_dropout(nn::linear(a, p.co_w, p.co_b), dropout, rng));
  }
  h = nn::layer_norm(out, p.ln2_gain, p.ln2_bias);
  Tensor<S> f = nn::linear(nn::gelu(nn::linear(h, p.ff1_w, p.ff1_b)), p.ff2_w, p.ff2_b);
  return nn::add(out, maybe_dropout(f, dropout, rng));
}

template <typename S>
Tensor<S> transformer_block_forward(const Tensor<S>& x, const Tensor<S>& cond,
                                    const BlockParams<S>& p, std::size_t heads) {
  const std::vector<nn::AttentionSegment> self{{0, x.rows(), 0, x.rows()}};
  std::vector<nn::AttentionSegment> cross;
  if (cond.defined()) cross.push_back({0, x.rows(), 0, cond.rows()});
  return transformer_block_forward(x, cond.defined() ? &cond : nullptr, p, heads, self, cross);
}

template <typename S>
CondEncoder<S>::CondEncoder(nn::ParamStore<S>& store, const std::string& prefix,
                            const CondEncoderShape& shape, Rng& rng)
    : shape_(shape) {
  const std::size_t d = shape.width;
  frame_emb_ = add_normal(store, prefix + ".frame_emb", {shape.classes, d}, 1.0, rng);
  down_w_ = add_normal(store, prefix + ".down.w", {2 * d, d}, 1.0 / std::sqrt(2.0 * d), rng);
  down_b_ = add_const<S>(store, prefix + ".down.b", {d}, S(0));
  const std::size_t kw = shape.window;
  proj1_w_ = add_normal(store, prefix + ".proj1.w", {kw * d, d}, 1.0 / std::sqrt(double(kw * d)),
                        rng);
  proj1_b_ = add_const<S>(store, prefix + ".proj1.b", {d}, S(0));
  proj2_w_ = add_normal(store, prefix + ".proj2.w", {d, d}, 1.0 / std::sqrt(double(d)), rng);
  proj2_b_ = add_const<S>(store, prefix + ".proj2.b", {d}, S(0));
  if (shape.positional) pos_ = add_sinusoid(store, prefix + ".pos", shape.max_rows, d, kCondPosRms);
  for (std::size_t b = 0; b < shape.blocks; ++b) {
    blocks_.push_back(register_block(store, prefix + ".blocks." + std::to_string(b), d,
                                     shape.ff_width, false, shape.blocks, rng));
  }
  ln_gain_ = add_const<S>(store, prefix + ".ln.gain", {d}, S(1));
  ln_bias_ = add_const<S>(store, prefix + ".ln.bias", {d}, S(0));
}

template <typename S>
CondSequence<S> CondEncoder<S>::encode(const std::vector<std::span<const int>>& clips) const {
  if (clips.empty()) throw UsageError("encode: no clips");
  CondSequence<S> out;
  std::vector<int> ids;
  std::vector<std::size_t> positions;
  std::vector<nn::AttentionSegment> segments;
  std::size_t rows = 0;
  for (const auto& clip : clips) {
    if (clip.empty()) throw ConfigError("viseme clip has no frames");
    const std::size_t lv = cond_length(clip.size());
    if (lv > shape_.max_rows) {
      throw ConfigError("clip of " + std::to_string(clip.size()) +
                        " frames exceeds the conditioning limit of " +
                        std::to_string(shape_.max_rows) + " rows");
    }
    out.offsets.push_back(rows);
    out.lengths.push_back(lv);
    segments.push_back({rows, lv, rows, lv});
    ids.insert(ids.end(), clip.begin(), clip.end());
    if (clip.size() % 2 == 1) ids.push_back(-1);
    for (std::size_t i = 0; i < lv; ++i) positions.push_back(i);
    rows += lv;
  }
  for (int id : ids) {
    if (id >= static_cast<int>(shape_.classes)) throw IndexError("viseme class out of range");
  }
  Tensor<S> pairs = nn::reshape(nn::embedding(frame_emb_, ids), {rows, 2 * shape_.width});
  Tensor<S> h = nn::gelu(nn::linear(pairs, down_w_, down_b_));
  // Local mixing: each row sees its window of neighbours within the clip.
  const std::size_t kw = shape_.window;
  if (kw > 1) {
    std::vector<int> win;
    const long half = long(kw / 2);
    for (std::size_t c = 0; c < out.offsets.size(); ++c) {
      const long off = long(out.offsets[c]), len = long(out.lengths[c]);
      for (long i = 0; i < len; ++i) {
        for (long o = -half; o < long(kw) - half; ++o) {
          const long j = i + o;
          win.push_back(j < 0 || j >= len ? -1 : int(off + j));
        }
      }
    }
    h = nn::reshape(nn::embedding(h, win), {rows, kw * shape_.width});
  }
  h = nn::linear(nn::gelu(nn::linear(h, proj1_w_, proj1_b_)), proj2_w_, proj2_b_);
  if (shape_.positional) h = nn::add(h, nn::gather_rows(pos_, positions));
  for (const auto& block : blocks_) {
    h = transformer_block_forward<S>(h, nullptr, block, shape_.heads, segments, {});
  }
  out.features = nn::layer_norm(h, ln_gain_, ln_bias_);
  return out;
}

void DenoiserConfig::validate() const {
  if (canvas_length < 2) throw ConfigError("canvas length must be at least 2");
  if (vocab_size < 2 || width == 0 || ff_width == 0 || blocks == 0 || viseme_classes == 0 ||
      max_cond_length == 0) {
    throw ConfigError("denoiser sizes must be positive");
  }
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("denoiser width must be divisible by the head count");
  }
  if (cond_window % 2 == 0) throw ConfigError("clip encoder window must be odd");
}

Meta DenoiserConfig::to_meta() const {
  return {{"model", "denoiser"},
          {"canvas_length", std::to_string(canvas_length)},
          {"vocab_size", std::to_string(vocab_size)},
          {"width", std::to_string(width)},
          {"heads", std::to_string(heads)},
          {"ff_width", std::to_string(ff_width)},
          {"blocks", std::to_string(blocks)},
          {"cond_window", std::to_string(cond_window)},
          {"cond_blocks", std::to_string(cond_blocks)},
          {"viseme_classes", std::to_string(viseme_classes)},
          {"max_cond_length", std::to_string(max_cond_length)},
          {"positional", positional ? "1" : "0"}};
}

DenoiserConfig DenoiserConfig::from_meta(const Meta& meta) {
  expect_kind(meta, "denoiser");
  DenoiserConfig c;
  c.canvas_length = meta_size(meta, "canvas_length");
  c.vocab_size = meta_size(meta, "vocab_size");
  c.width = meta_size(meta, "width");
  c.heads = meta_size(meta, "heads");
  c.ff_width = meta_size(meta, "ff_width");
  c.blocks = meta_size(meta, "blocks");
  c.cond_window = meta_size(meta, "cond_window");
  c.cond_blocks = meta_size(meta, "cond_blocks");
  c.viseme_classes = meta_size(meta, "viseme_classes");
  c.max_cond_length = meta_size(meta, "max_cond_length");
  c.positional = meta_size(meta, "positional") != 0;
  c.validate();
  return c;
}

template <typename S>
Denoiser<S>::Denoiser(const DenoiserConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, "denoiser.init"));
  const std::size_t d = config_.width;
  cond_ = CondEncoder<S>(params_, "cond",
                         {config_.viseme_classes, d, config_.max_cond_length, config_.positional,
                          config_.cond_window, config_.cond_blocks, config_.heads,
                          config_.ff_width},
                         rng);
  tok_emb_ = add_normal(params_, "tok_emb", {config_.vocab_size, d}, kInitStd, rng);
  if (config_.positional) {
    pos_emb_ = add_sinusoid(params_, "pos_emb", config_.canvas_length, d, kTokenPosRms);
  }
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    blocks_.push_back(register_block(params_, "blocks." + std::to_string(b), d, config_.ff_width,
                                     true, config_.blocks, rng));
  }
  lnf_gain_ = add_const<S>(params_, "lnf.gain", {d}, S(1));
  lnf_bias_ = add_const<S>(params_, "lnf.bias", {d}, S(0));
  head_w_ = add_normal(params_, "head.w", {d, config_.vocab_size}, kInitStd, rng);
  head_b_ = add_const<S>(params_, "head.b", {config_.vocab_size}, S(0));
}

template <typename S>
CondSequence<S> Denoiser<S>::encode(const std::vector<std::span<const int>>& clips) const {
  return cond_.encode(clips);
}

template <typename S>
Tensor<S> Denoiser<S>::logits(const std::vector<std::vector<int>>& canvases,
                              const CondSequence<S>& cond,
                              const std::vector<std::size_t>& cond_index) const {
  const std::size_t t = config_.canvas_length;
  if (canvases.empty()) throw UsageError("denoiser: no canvases");
  if (cond_index.size() != canvases.size()) {
    throw UsageError("denoiser: need one conditioning index per canvas");
  }
  std::vector<int> ids;
  ids.reserve(canvases.size() * t);
  std::vector<std::size_t> positions;
  std::vector<nn::AttentionSegment> self_segments, cross_segments;
  for (std::size_t b = 0; b < canvases.size(); ++b) {
    if (canvases[b].size() != t) {
      throw ConfigError("canvas has " + std::to_string(canvases[b].size()) +
                        " cells, denoiser expects " + std::to_string(t));
    }
    for (int id : canvases[b]) {
      if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
        throw IndexError("canvas token outside the vocabulary: " + std::to_string(id));
      }
    }
    if (cond_index[b] >= cond.offsets.size()) throw UsageError("denoiser: bad conditioning index");
    ids.insert(ids.end(), canvases[b].begin(), canvases[b].end());
    for (std::size_t i = 0; i < t; ++i) positions.push_back(i);
    self_segments.push_back({b * t, t, b * t, t});
    cross_segments.push_back({b * t, t, cond.offsets[cond_index[b]], cond.lengths[cond_index[b]]});
  }
  Tensor<S> x = nn::embedding(tok_emb_, ids);
  if (config_.positional) x = nn::add(x, nn::gather_rows(pos_emb_, positions));
  for (const auto& block : blocks_) {
    x = transformer_block_forward(x, &cond.features, block, config_.heads, self_segments,
                                  cross_segments);
  }
  x = nn::layer_norm(x, lnf_gain_, lnf_bias_);
  return nn::linear(x, head_w_, head_b_);
}

template <typename S>
Tensor<S> Denoiser<S>::forward(const std::vector<int>& cells, std::span<const int> frames) const {
  const auto cond = encode({frames});
  return logits({cells}, cond, {0});
}

template <typename S>
void Denoiser<S>::save(const std::filesystem::path& path) const {
  Meta meta = config_.to_meta();
  meta["trained_stage"] = std::to_string(trained_stage_);
  nn::write_checkpoint(nn::to_checkpoint(params_, meta), path);
}

template <typename S>
Denoiser<S> Denoiser<S>::load(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  Denoiser<S> model(DenoiserConfig::from_meta(ck.meta), 0);
  nn::load_into(model.params_, ck);
  model.trained_stage_ = static_cast<int>(meta_size(ck.meta, "trained_stage"));
  return model;
}

LengthPredictorConfig LengthPredictorConfig::full_size() {
  LengthPredictorConfig c;
  c.width = 384;
  c.heads = 6;
  c.ff_width = 1536;
  c.window = 1;
  return c;
}

void LengthPredictorConfig::validate() const {
  if (max_length == 0 || width == 0 || ff_width == 0 || layers == 0 || viseme_classes == 0 ||
      max_cond_length == 0) {
    throw ConfigError("length predictor sizes must be positive");
  }
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("length predictor width must be divisible by the head count");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (window % 2 == 0) throw ConfigError("clip encoder window must be odd");
}

Meta LengthPredictorConfig::to_meta() const {
  return {{"model", "length_predictor"},
          {"max_length", std::to_string(max_length)},
          {"width", std::to_string(width)},
          {"heads", std::to_string(heads)},
          {"ff_width", std::to_string(ff_width)},
          {"layers", std::to_string(layers)},
          {"window", std::to_string(window)},
          {"dropout", fmt(dropout)},
          {"viseme_classes", std::to_string(viseme_classes)},
          {"max_cond_length", std::to_string(max_cond_length)}};
}

LengthPredictorConfig LengthPredictorConfig::from_meta(const Meta& meta) {
  expect_kind(meta, "length_predictor");
  LengthPredictorConfig c;
  c.max_length = meta_size(meta, "max_length");
  c.width = meta_size(meta, "width");
  c.heads = meta_size(meta, "heads");
  c.ff_width = meta_size(meta, "ff_width");
  c.layers = meta_size(meta, "layers");
  c.window = meta_size(meta, "window");
  c.dropout = meta_double(meta, "dropout");
  c.viseme_classes = meta_size(meta, "viseme_classes");
  c.max_cond_length = meta_size(meta, "max_cond_length");
  c.validate();
  return c;
}

double LengthPosterior::prob(std::size_t k) const {
  if (k < 1 || k > probs.size()) return 0.0;
  return probs[k - 1];
}

std::size_t LengthPosterior::predicted() const {
  if (probs.empty()) throw UsageError("empty length posterior");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best + 1;
}

template <typename S>
LengthPredictor<S>::LengthPredictor(const LengthPredictorConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, "length.init"));
  const std::size_t d = config_.width;
  cond_ = CondEncoder<S>(params_, "cond",
                         {config_.viseme_classes, d, config_.max_cond_length, false,
                          config_.window, 0, config_.heads, config_.ff_width},
                         rng);
  len_token_ = add_normal(params_, "len_token", {1, d}, kInitStd, rng);
  pos_emb_ = add_normal(params_, "pos_emb", {config_.max_cond_length + 1, d}, kInitStd, rng);
  for (std::size_t b = 0; b < config_.layers; ++b) {
    blocks_.push_back(register_block(params_, "blocks." + std::to_string(b), d, config_.ff_width,
                                     false, config_.layers, rng));
  }
  lnf_gain_ = add_const<S>(params_, "lnf.gain", {d}, S(1));
  lnf_bias_ = add_const<S>(params_, "lnf.bias", {d}, S(0));
  head_w_ = add_normal(params_, "head.w", {d, config_.max_length}, kInitStd, rng);
  head_b_ = add_const<S>(params_, "head.b", {config_.max_length}, S(0));
}

template <typename S>
Tensor<S> LengthPredictor<S>::logits(const std::vector<std::span<const int>>& clips,
                                     Rng* train_rng) const {
  const auto cond = cond_.encode(clips);
  // Row 0 of `stacked` is [LEN]; feature row r sits at r + 1.
  Tensor<S> stacked = nn::concat_rows<S>({len_token_, cond.features});
  std::vector<std::size_t> order, positions, len_rows;
  std::vector<nn::AttentionSegment> segments;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::size_t begin = order.size();
    len_rows.push_back(begin);
    order.push_back(0);
    positions.push_back(0);
    for (std::size_t r = 0; r < cond.lengths[i]; ++r) {
      order.push_back(1 + cond.offsets[i] + r);
      positions.push_back(1 + r);
    }
    segments.push_back({begin, cond.lengths[i] + 1, begin, cond.lengths[i] + 1});
  }
  Tensor<S> x = nn::add(nn::gather_rows(stacked, order), nn::gather_rows(pos_emb_, positions));
  const double p = train_rng ? config_.dropout : 0.0;
  x = maybe_dropout(x, p, train_rng);
  for (const auto& block : blocks_) {
    x = transformer_block_forward<S>(x, nullptr, block, config_.heads, segments, {}, p, train_rng);
  }
  x = nn::layer_norm(nn::gather_rows(x, len_rows), lnf_gain_, lnf_bias_);
  return nn::linear(x, head_w_, head_b_);
}

template <typename S>
std::vector<LengthPosterior> LengthPredictor<S>::posteriors(
    const std::vector<std::span<const int>>& clips) const {
  nn::NoGradGuard no_grad;
  const Tensor<S> probs = nn::softmax(logits(clips));
  std::vector<LengthPosterior> out(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    out[i].probs.resize(config_.max_length);
    for (std::size_t k = 0; k < config_.max_length; ++k) out[i].probs[k] = probs.at(i, k);
  }
  return out;
}

template <typename S>
LengthPosterior LengthPredictor<S>::posterior(std::span<const int> frames) const {
  return posteriors({frames}).front();
}

template <typename S>
void LengthPredictor<S>::save(const std::filesystem::path& path) const {
  nn::write_checkpoint(nn::to_checkpoint(params_, config_.to_meta()), path);
}

template <typename S>
LengthPredictor<S> LengthPredictor<S>::load(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  LengthPredictor<S> model(LengthPredictorConfig::from_meta(ck.meta), 0);
  nn::load_into(model.params_, ck);
  return model;
}

#define MASKSCRIBE_INSTANTIATE_MODEL(S)                                                       \
  template BlockParams<S> register_block(nn::ParamStore<S>&, const std::string&, std::size_t, \
                                         std::size_t, bool, std::size_t, Rng&);               \
  template Tensor<S> transformer_block_forward(                                               \
      const Tensor<S>&, const Tensor<S>*, const BlockParams<S>&, std::size_t,                 \
      const std::vector<nn::AttentionSegment>&, const std::vector<nn::AttentionSegment>&,     \
      double, Rng*);                                                                          \
  template Tensor<S> transformer_block_forward(const Tensor<S>&, const Tensor<S>&,            \
                                               const BlockParams<S>&, std::size_t);           \
  template class CondEncoder<S>;                                                              \
  template class Denoiser<S>;                                                                 \
  template class LengthPredictor<S>;

MASKSCRIBE_INSTANTIATE_MODEL(float)
MASKSCRIBE_INSTANTIATE_MODEL(double)

}  // namespace maskscribe
