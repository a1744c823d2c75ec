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

namespace maskscribe::nn {

// a[m x k] * b[k x n]
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);

// x[r x in] * w[in x out] + bias[out]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias);

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);

// Elementwise product of equal-shaped tensors.
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor);

template <typename S>
Tensor<S> gelu(const Tensor<S>& x);

// Normalizes each row over the last dimension, then applies gain and bias.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = S(1e-5));

// Softmax along `axis` (negative counts from the back). Max-subtracted.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis = -1);

// Row lookup; an id of -1 yields a zero row with no gradient.
template <typename S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int>& ids);

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape);

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts);

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<std::size_t>& rows);

template <typename S>
Tensor<S> sum(const Tensor<S>& x);

// Inverted dropout; identity when p == 0.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng);

// A block of query rows attending to a block of key/value rows.
struct AttentionSegment {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
};

// Multi-head scaled dot-product attention over already-projected q, k, v.
// Columns split evenly into `heads`. No causal mask: every query in a
// segment sees every key in that segment. Query rows outside all segments
// come out zero.
template <typename S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                    std::size_t heads, const std::vector<AttentionSegment>& segments);

// sum_i weights[i] * -log softmax(logits[i])[targets[i]] as a 1-element tensor.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                        const std::vector<S>& weights);

}  // namespace maskscribe::nn
