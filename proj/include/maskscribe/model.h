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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskscribe/canvas.h"
#include "maskscribe/nn/ops.h"
#include "maskscribe/nn/params.h"
#include "maskscribe/rng.h"

namespace maskscribe {

using Meta = std::map<std::string, std::string>;

// Pre-norm transformer block: self-attention, optional cross-attention to a
// conditioning sequence, then a GELU feed-forward. Each sub-layer is a
// residual branch.
template <typename S>
struct BlockParams {
  nn::Tensor<S> ln1_gain, ln1_bias;
  nn::Tensor<S> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  bool has_cross = false;
  nn::Tensor<S> lnc_gain, lnc_bias;
  nn::Tensor<S> cq_w, cq_b, ck_w, ck_b, cv_w, cv_b, co_w, co_b;
  nn::Tensor<S> ln2_gain, ln2_bias;
  nn::Tensor<S> ff1_w, ff1_b, ff2_w, ff2_b;
};

template <typename S>
BlockParams<S> register_block(nn::ParamStore<S>& store, const std::string& prefix,
                              std::size_t width, std::size_t ff_width, bool cross,
                              std::size_t depth, Rng& rng);

// Batched form: `self_segments` groups rows of x into independent
// sequences; `cross_segments` pairs each sequence with its rows of `cond`.
// No causal mask anywhere. Dropout (p > 0, rng given) hits each branch output.
template <typename S>
nn::Tensor<S> transformer_block_forward(const nn::Tensor<S>& x, const nn::Tensor<S>* cond,
                                        const BlockParams<S>& p, std::size_t heads,
                                        const std::vector<nn::AttentionSegment>& self_segments,
                                        const std::vector<nn::AttentionSegment>& cross_segments,
                                        double dropout = 0.0, Rng* rng = nullptr);

// Single sequence x[L x d] attending to cond[Lv x d] (cond may be undefined).
template <typename S>
nn::Tensor<S> transformer_block_forward(const nn::Tensor<S>& x, const nn::Tensor<S>& cond,
                                        const BlockParams<S>& p, std::size_t heads);

// Encoded conditioning features for a batch of clips: rows of `features`
// belonging to clip i are [offsets[i], offsets[i] + lengths[i]).
template <typename S>
struct CondSequence {
  nn::Tensor<S> features;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;
  double frame_rate = 25.0;
};

// Raw frame count N maps to ceil(N / 2) conditioning rows.
inline std::size_t cond_length(std::size_t raw_frames) { return (raw_frames + 1) / 2; }

struct CondEncoderShape {
  std::size_t classes = 12;
  std::size_t width = 128;
  std::size_t max_rows = 64;
  bool positional = true;
  std::size_t window = 1;  // rows mixed by the local projector (odd)
  std::size_t blocks = 0;  // self-attention blocks over the clip
  std::size_t heads = 4;
  std::size_t ff_width = 512;
};

// Viseme-frame embedder: class embedding, window-2 stride-2 temporal
// downsampling (an odd tail frame is paired with zeros), a two-layer GELU
// projector, learned positions, optional self-attention blocks, and a final
// LayerNorm.
template <typename S>
class CondEncoder {
 public:
  CondEncoder() = default;
  CondEncoder(nn::ParamStore<S>& store, const std::string& prefix, const CondEncoderShape& shape,
              Rng& rng);

  CondSequence<S> encode(const std::vector<std::span<const int>>& clips) const;
  std::size_t max_rows() const { return shape_.max_rows; }


 private:
  CondEncoderShape shape_;
  nn::Tensor<S> frame_emb_, down_w_, down_b_, proj1_w_, proj1_b_, proj2_w_, proj2_b_, pos_;
  nn::Tensor<S> ln_gain_, ln_bias_;
  std::vector<BlockParams<S>> blocks_;
};

struct DenoiserConfig {
  std::size_t canvas_length = 32;
  std::size_t vocab_size = 30;
  std::size_t width = 128;
  std::size_t heads = 4;
  std::size_t ff_width = 512;
  std::size_t blocks = 2;
  std::size_t cond_window = 7;  // local mixing window of the clip encoder, in rows
  std::size_t cond_blocks = 1;  // self-attention blocks in the clip encoder
  std::size_t viseme_classes = 12;
  std::size_t max_cond_length = 64;
  bool positional = true;

  void validate() const;
  Meta to_meta() const;
  static DenoiserConfig from_meta(const Meta& meta);
};

// Bidirectional transformer over the canvas, cross-attending to the encoded
// viseme clip; returns logits for every canvas cell.
template <typename S>
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& config, std::uint64_t seed);
  // Parameters are shared tensor handles, so copies would alias; move only.
  Denoiser(Denoiser&&) noexcept = default;
  Denoiser& operator=(Denoiser&&) noexcept = default;
  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;

  const DenoiserConfig& config() const { return config_; }
  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }

  // 0 = untrained, 1 = content-alignment stage done, 2 = full-canvas stage done.
  int trained_stage() const { return trained_stage_; }
  void set_trained_stage(int stage) { trained_stage_ = stage; }

  CondSequence<S> encode(const std::vector<std::span<const int>>& clips) const;

  // Logits [B*T x V] for B canvases; canvas b attends to clip cond_index[b].
  nn::Tensor<S> logits(const std::vector<std::vector<int>>& canvases, const CondSequence<S>& cond,
                       const std::vector<std::size_t>& cond_index) const;

  // Logits [T x V] for one canvas and its clip.
  nn::Tensor<S> forward(const std::vector<int>& cells, std::span<const int> frames) const;

  void save(const std::filesystem::path& path) const;
  static Denoiser load(const std::filesystem::path& path);

 private:
  DenoiserConfig config_;
  nn::ParamStore<S> params_;
  CondEncoder<S> cond_;
  nn::Tensor<S> tok_emb_, pos_emb_, lnf_gain_, lnf_bias_, head_w_, head_b_;
  std::vector<BlockParams<S>> blocks_;
  int trained_stage_ = 0;
};

struct LengthPredictorConfig {
  std::size_t max_length = 31;  // K_max: classes k = 1..max_length
  std::size_t width = 128;
  std::size_t heads = 4;
  std::size_t ff_width = 512;
  std::size_t layers = 2;
  std::size_t window = 7;  // local mixing window of the clip encoder, in rows
  double dropout = 0.1;
  std::size_t viseme_classes = 12;
  std::size_t max_cond_length = 64;

  // Hidden 384, 6 heads, feed-forward 1536, no local mixing: about 4M
  // parameters.
  static LengthPredictorConfig full_size();

  void validate() const;
  Meta to_meta() const;
  static LengthPredictorConfig from_meta(const Meta& meta);
};

struct LengthPosterior {
  std::vector<double> probs;  // probs[k - 1] = P(k | v)

  std::size_t max_length() const { return probs.size(); }
  double prob(std::size_t k) const;
  // Most probable length; the smallest k wins ties.
  std::size_t predicted() const;
};

// A learnable [LEN] query prepended to the encoded clip, a small
// bidirectional encoder, and a classifier over lengths read off [LEN].
template <typename S>
class LengthPredictor {
 public:
  LengthPredictor(const LengthPredictorConfig& config, std::uint64_t seed);
  // Parameters are shared tensor handles, so copies would alias; move only.
  LengthPredictor(LengthPredictor&&) noexcept = default;
  LengthPredictor& operator=(LengthPredictor&&) noexcept = default;
  LengthPredictor(const LengthPredictor&) = delete;
  LengthPredictor& operator=(const LengthPredictor&) = delete;

  const LengthPredictorConfig& config() const { return config_; }
  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }

  // Logits [B x max_length]. Dropout applies only when `train_rng` is given.
  nn::Tensor<S> logits(const std::vector<std::span<const int>>& clips,
                       Rng* train_rng = nullptr) const;

  LengthPosterior posterior(std::span<const int> frames) const;
  std::vector<LengthPosterior> posteriors(const std::vector<std::span<const int>>& clips) const;

  void save(const std::filesystem::path& path) const;
  static LengthPredictor load(const std::filesystem::path& path);

 private:
  LengthPredictorConfig config_;
  nn::ParamStore<S> params_;
  CondEncoder<S> cond_;
  nn::Tensor<S> len_token_, pos_emb_, lnf_gain_, lnf_bias_, head_w_, head_b_;
  std::vector<BlockParams<S>> blocks_;
};

}  // namespace maskscribe
