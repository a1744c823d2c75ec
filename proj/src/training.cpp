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

#include "maskscribe/training.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "maskscribe/canvas.h"
#include "maskscribe/error.h"
#include "maskscribe/nn/params.h"

namespace maskscribe {
namespace {

// Walks the data in shuffled epochs so every sample is seen once per pass.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    rng_.shuffle(order_.begin(), order_.end());
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(order_.begin(), order_.end());
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

std::string batch_ids(const std::vector<synth::Sample>& data,
                      const std::vector<std::size_t>& batch) {
  std::string out;
  for (std::size_t i : batch) {
    if (!out.empty()) out += ',';
    out += data[i].id;
  }
  return out;
}

[[noreturn]] void abort_step(std::size_t step, double lr, const std::string& ids,
                             const std::string& detail) {
  std::ostringstream os;
  os << "non-finite loss at step " << step << " (lr " << lr << ", batch " << ids << "): " << detail;
  throw NumericError(os.str());
}

}  // namespace

TrainConfig TrainConfig::for_stage(int stage) {
  TrainConfig c;
  c.stage = stage;
  if (stage == 2) {
    c.steps = 500;
    c.lr = 5e-4;
  }
  return c;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("training stage must be 1 or 2");
  if (steps == 0) throw ConfigError("steps must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (min_lr_scale < 0.0 || min_lr_scale > 1.0) throw ConfigError("min lr scale must be in [0, 1]");
}

void LengthTrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (min_lr_scale < 0.0 || min_lr_scale > 1.0) throw ConfigError("min lr scale must be in [0, 1]");
}

double cosine_lr(double lr, double min_lr_scale, std::size_t step, std::size_t steps) {
  const double progress = steps == 0 ? 1.0 : std::min(1.0, double(step) / double(steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return lr * (min_lr_scale + (1.0 - min_lr_scale) * cosine);
}

LossCurve train_stage(Denoiser<float>& model, const std::vector<synth::Sample>& data,
                      const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (data.empty()) throw DatasetError("training set is empty");
  if (config.stage == 2 && model.trained_stage() < 1) {
    throw UsageError("stage 2 fine-tunes a stage-1 model; train stage 1 first or load its checkpoint");
  }
  const std::size_t t = model.config().canvas_length;
  std::vector<Canvas> clean;
  clean.reserve(data.size());
  for (const auto& s : data) clean.push_back(build_clean_canvas(s.tokens, t));

  auto& params = model.params();
  params.reset_optimizer();
  const std::string stream = "train.stage" + std::to_string(config.stage);
  BatchSampler sampler(data.size(), derive_seed(config.seed, stream + ".order"));
  Rng mask_rng(derive_seed(config.seed, stream + ".mask"));

  nn::AdamWConfig opt;
  opt.clip_norm = config.clip_norm;
  opt.weight_decay = config.weight_decay;

  LossCurve curve;
  curve.reserve(config.steps);
  const double scale = 1.0 / double(config.batch_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    opt.lr = cosine_lr(config.lr, config.min_lr_scale, step, config.steps);
    const auto batch = sampler.next(config.batch_size);
    std::vector<std::vector<int>> noisy;
    std::vector<std::span<const int>> clips;
    std::vector<std::size_t> cond_index;
    std::vector<int> targets;
    std::vector<double> weights;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Canvas& c = clean[batch[b]];
      auto drawn = apply_forward_mask(c, config.stage, mask_rng);
      denoise_targets(c, drawn.draw, scale, targets, weights);
      noisy.push_back(std::move(drawn.canvas.cells));
      clips.push_back(data[batch[b]].clip.frames);
      cond_index.push_back(b);
    }
    params.zero_grad();
    double value = 0.0;
    try {
      const auto cond = model.encode(clips);
      const auto logits = model.logits(noisy, cond, cond_index);
      auto loss = nn::cross_entropy(logits, targets,
                                    std::vector<float>(weights.begin(), weights.end()));
      value = loss.item();
      if (!std::isfinite(value)) abort_step(step, opt.lr, batch_ids(data, batch), "loss");
      nn::backward(loss);
      nn::adamw_step(params, opt);
    } catch (const NumericError& e) {
      if (std::string(e.what()).rfind("non-finite loss at step", 0) == 0) throw;
      abort_step(step, opt.lr, batch_ids(data, batch), e.what());
    }
    curve.push_back({step, opt.lr, value});
    if (on_step) on_step(curve.back());
  }
  model.set_trained_stage(std::max(model.trained_stage(), config.stage));
  return curve;
}

void write_loss_csv(const LossCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,lr,loss\n" << std::setprecision(9);
  for (const auto& p : curve) out << p.step << ',' << p.lr << ',' << p.loss << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

LengthValidation validate_length_predictor(const LengthPredictor<float>& model,
                                           const std::vector<synth::Sample>& samples) {
  LengthValidation v;
  if (samples.empty()) return v;
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    std::vector<std::span<const int>> clips;
    for (std::size_t i = begin; i < end; ++i) clips.push_back(samples[i].clip.frames);
    for (const auto& post : model.posteriors(clips)) v.predictions.push_back(post.predicted());
  }
  const int windows[4] = {0, 1, 3, 5};
  std::size_t hits[4] = {0, 0, 0, 0};
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const long truth = long(samples[i].length());
    v.truths.push_back(samples[i].length());
    const long diff = std::labs(long(v.predictions[i]) - truth);
    abs_sum += double(diff);
    for (int w = 0; w < 4; ++w) hits[w] += diff <= windows[w];
  }
  for (int w = 0; w < 4; ++w) v.acc[w] = 100.0 * double(hits[w]) / double(samples.size());
  v.mae = abs_sum / double(samples.size());
  return v;
}

LengthTrainResult train_length_predictor(LengthPredictor<float>& model,
                                         const std::vector<synth::Sample>& train,
                                         const std::vector<synth::Sample>& val,
                                         const LengthTrainConfig& config,
                                         const StepCallback& on_step) {
  config.validate();
  if (train.empty()) throw DatasetError("training set is empty");
  const std::size_t k_max = model.config().max_length;
  for (const auto* split : {&train, &val}) {
    for (const auto& s : *split) {
      if (s.length() < 1 || s.length() > k_max) {
        throw DatasetError("sample " + s.id + " has length " + std::to_string(s.length()) +
                           ", outside 1.." + std::to_string(k_max));
      }
    }
  }
  auto& params = model.params();
  params.reset_optimizer();
  BatchSampler sampler(train.size(), derive_seed(config.seed, "length.order"));
  Rng dropout_rng(derive_seed(config.seed, "length.dropout"));
  nn::AdamWConfig opt;
  opt.clip_norm = config.clip_norm;
  opt.weight_decay = config.weight_decay;

  LengthTrainResult result;
  result.curve.reserve(config.steps);
  const float scale = 1.0f / float(config.batch_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    opt.lr = cosine_lr(config.lr, config.min_lr_scale, step, config.steps);
    const auto batch = sampler.next(config.batch_size);
    std::vector<std::span<const int>> clips;
    std::vector<int> targets;
    for (std::size_t i : batch) {
      clips.push_back(train[i].clip.frames);
      targets.push_back(int(train[i].length()) - 1);
    }
    params.zero_grad();
    double value = 0.0;
    try {
      auto loss = nn::cross_entropy(model.logits(clips, &dropout_rng), targets,
                                    std::vector<float>(batch.size(), scale));
      value = loss.item();
      if (!std::isfinite(value)) abort_step(step, opt.lr, batch_ids(train, batch), "loss");
      nn::backward(loss);
      nn::adamw_step(params, opt);
    } catch (const NumericError& e) {
      if (std::string(e.what()).rfind("non-finite loss at step", 0) == 0) throw;
      abort_step(step, opt.lr, batch_ids(train, batch), e.what());
    }
    result.curve.push_back({step, opt.lr, value});
    if (on_step) on_step(result.curve.back());
  }
  result.validation = validate_length_predictor(model, val);
  return result;
}

}  // namespace maskscribe
