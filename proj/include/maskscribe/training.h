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
#include <functional>
#include <vector>

#include "maskscribe/model.h"
#include "maskscribe/synthdata.h"

namespace maskscribe {

struct TrainConfig {
  int stage = 1;
  std::size_t steps = 3000;
  double lr = 1e-3;
  double min_lr_scale = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  double weight_decay = 0.01;

  // Stage 1: 3000 steps at 1e-3. Stage 2: 500 steps at 5e-4.
  static TrainConfig for_stage(int stage);
  void validate() const;
};

// Cosine decay from lr at step 0 to lr * min_lr_scale at step == steps.
double cosine_lr(double lr, double min_lr_scale, std::size_t step, std::size_t steps);

struct LossPoint {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

using LossCurve = std::vector<LossPoint>;
using StepCallback = std::function<void(const LossPoint&)>;

// Masked-denoising training of `model` on `data` for one stage. Stage 2
// requires a model that finished stage 1 and starts with a fresh optimizer.
// Throws NumericError naming the step, lr and batch ids on a non-finite loss.
LossCurve train_stage(Denoiser<float>& model, const std::vector<synth::Sample>& data,
                      const TrainConfig& config, const StepCallback& on_step = {});

// Columns: step, lr, loss.
void write_loss_csv(const LossCurve& curve, const std::filesystem::path& path);

struct LengthTrainConfig {
  std::size_t steps = 10000;
  double lr = 1e-3;
  double min_lr_scale = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  double weight_decay = 0.01;

  void validate() const;
};

struct LengthValidation {
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> truths;
  double acc[4] = {0, 0, 0, 0};  // percent within 0, 1, 3, 5 tokens
  double mae = 0.0;
};

struct LengthTrainResult {
  LossCurve curve;
  LengthValidation validation;
};

// Cross-entropy training of the length classifier on (clip, K) pairs, then
// validation Acc@{0,1,3,5} and MAE. Throws DatasetError if any K exceeds
// the predictor's maximum length.
LengthTrainResult train_length_predictor(LengthPredictor<float>& model,
                                         const std::vector<synth::Sample>& train,
                                         const std::vector<synth::Sample>& val,
                                         const LengthTrainConfig& config,
                                         const StepCallback& on_step = {});

LengthValidation validate_length_predictor(const LengthPredictor<float>& model,
                                           const std::vector<synth::Sample>& samples);

}  // namespace maskscribe
