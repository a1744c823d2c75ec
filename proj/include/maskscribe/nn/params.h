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
#include <string>
#include <unordered_map>
#include <vector>

#include "maskscribe/nn/tensor.h"

namespace maskscribe::nn {

// Named, ordered parameter store with per-parameter AdamW moments.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<S> tensor;
    std::vector<S> first_moment;
    std::vector<S> second_moment;
  };

  // Registers a trainable tensor. Names must be unique.
  Tensor<S> add(const std::string& name, Shape shape, std::vector<S> init);

  Tensor<S> get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t parameter_count() const;
  void zero_grad();

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }

  // Resets moments and the step counter (fresh optimizer, same weights).
  void reset_optimizer();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

struct AdamWStats {
  double grad_norm = 0.0;  // global L2 norm before clipping
  double clip_scale = 1.0;
};

// One decoupled-weight-decay Adam update with bias correction. Gradients are
// first rescaled so their global norm is at most clip_norm. Parameters
// without a gradient are treated as having a zero gradient.
template <typename S>
AdamWStats adamw_step(ParamStore<S>& params, const AdamWConfig& config);

}  // namespace maskscribe::nn
