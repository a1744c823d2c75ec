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

#include "maskscribe/canvas.h"

#include "maskscribe/error.h"
#include "maskscribe/nn/ops.h"
#include "maskscribe/vocab.h"

namespace maskscribe {

Canvas build_clean_canvas(const std::vector<int>& transcript, std::size_t canvas_length) {
  if (transcript.empty()) throw LengthError("transcript must contain at least one token");
  if (transcript.size() + 1 > canvas_length) {
    throw LengthError("transcript of " + std::to_string(transcript.size()) +
                      " tokens does not fit a canvas of " + std::to_string(canvas_length));
  }
  for (int id : transcript) {
    if (!vocab::is_text(id)) {
      throw VocabError("transcript contains non-text id " + std::to_string(id));
    }
  }
  Canvas c;
  c.transcript_length = transcript.size();
  c.cells = transcript;
  c.cells.push_back(vocab::kEos);
  c.cells.resize(canvas_length, vocab::kPad);
  return c;
}

std::vector<std::size_t> supervision_set(const Canvas& clean, int stage) {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  const std::size_t end = stage == 1 ? clean.transcript_length + 1 : clean.length();
  std::vector<std::size_t> out(end);
  for (std::size_t i = 0; i < end; ++i) out[i] = i;
  return out;
}

NoisyCanvas apply_forward_mask_at(const Canvas& clean, int stage, double t, Rng& rng) {
  if (!(t > 0.0 && t <= 1.0)) throw ConfigError("masking ratio must be in (0, 1]");
  const auto supervised = supervision_set(clean, stage);
  NoisyCanvas out{clean, {t, {}}};
  for (std::size_t pos : supervised) {
    if (rng.bernoulli(t)) out.draw.masked.push_back(pos);
  }
  if (out.draw.masked.empty()) {
    const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(supervised.size()) - 1);
    out.draw.masked.push_back(supervised[pick]);
  }
  for (std::size_t pos : out.draw.masked) out.canvas.cells[pos] = vocab::kMask;
  return out;
}

NoisyCanvas apply_forward_mask(const Canvas& clean, int stage, Rng& rng) {
  return apply_forward_mask_at(clean, stage, rng.uniform_open_closed(), rng);
}

void denoise_targets(const Canvas& clean, const MaskDraw& draw, double scale,
                     std::vector<int>& targets, std::vector<double>& weights) {
  if (draw.masked.empty()) throw ContractViolation("denoise loss needs a nonempty mask set");
  if (!(draw.t > 0.0 && draw.t <= 1.0)) {
    throw ContractViolation("masking ratio must be in (0, 1]");
  }
  const std::size_t base = targets.size();
  targets.insert(targets.end(), clean.cells.begin(), clean.cells.end());
  weights.resize(base + clean.length(), 0.0);
  for (std::size_t pos : draw.masked) {
    if (pos >= clean.length()) throw ContractViolation("masked position outside the canvas");
    weights[base + pos] = scale / draw.t;
  }
}

template <typename S>
nn::Tensor<S> denoise_loss(const nn::Tensor<S>& logits, const Canvas& clean,
                           const MaskDraw& draw) {
  if (logits.rows() != clean.length()) {
    throw DimensionError("denoise_loss: logits rows must equal canvas length");
  }
  std::vector<int> targets;
  std::vector<double> weights;
  denoise_targets(clean, draw, 1.0, targets, weights);
  return nn::cross_entropy(logits, targets, std::vector<S>(weights.begin(), weights.end()));
}

template nn::Tensor<float> denoise_loss(const nn::Tensor<float>&, const Canvas&, const MaskDraw&);
template nn::Tensor<double> denoise_loss(const nn::Tensor<double>&, const Canvas&,
                                         const MaskDraw&);

}  // namespace maskscribe
