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
#include <vector>

#include "maskscribe/nn/tensor.h"
#include "maskscribe/rng.h"

namespace maskscribe {

// Fixed-length token board. Positions are 0-based throughout the code.
struct Canvas {
  std::vector<int> cells;
  std::size_t transcript_length = 0;  // K

  std::size_t length() const { return cells.size(); }
  std::size_t eos_position() const { return transcript_length; }
  bool operator==(const Canvas&) const = default;
};

// K text cells, one EOS, then PAD up to T cells. Requires 1 <= K <= T-1 and
// no reserved ids in the transcript.
Canvas build_clean_canvas(const std::vector<int>& transcript, std::size_t canvas_length);

// Stage 1 supervises the transcript and its EOS (positions 0..K);
// stage 2 supervises the whole canvas.
std::vector<std::size_t> supervision_set(const Canvas& clean, int stage);

struct MaskDraw {
  double t = 1.0;                    // masking ratio in (0, 1]
  std::vector<std::size_t> masked;  // ascending positions, never empty
};

struct NoisyCanvas {
  Canvas canvas;
  MaskDraw draw;
};

// Draws t ~ U(0, 1] and masks each supervised position with probability t.
// If nothing got masked, one supervised position is masked uniformly at
// random. Positions outside the supervision set keep their clean tokens.
NoisyCanvas apply_forward_mask(const Canvas& clean, int stage, Rng& rng);

// Same, with the masking ratio given.
NoisyCanvas apply_forward_mask_at(const Canvas& clean, int stage, double t, Rng& rng);

// Per-position cross-entropy targets and weights for one sample:
// weight 1/t on masked positions, 0 elsewhere, all multiplied by `scale`.
void denoise_targets(const Canvas& clean, const MaskDraw& draw, double scale,
                     std::vector<int>& targets, std::vector<double>& weights);

// -(1/t) * sum over masked positions of log p(clean token), from logits[T x V].
template <typename S>
nn::Tensor<S> denoise_loss(const nn::Tensor<S>& logits, const Canvas& clean,
                           const MaskDraw& draw);

}  // namespace maskscribe
