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

#include "maskscribe/nn/params.h"

#include <cmath>

namespace maskscribe::nn {

template <typename S>
Tensor<S> ParamStore<S>::add(const std::string& name, Shape shape, std::vector<S> init) {
  if (contains(name)) throw UsageError("duplicate parameter name: " + name);
  Tensor<S> t = Tensor<S>::from(std::move(shape), std::move(init));
  t.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t, std::vector<S>(t.size(), S(0)), std::vector<S>(t.size(), S(0))});
  return t;
}

template <typename S>
Tensor<S> ParamStore<S>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

template <typename S>
std::size_t ParamStore<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename S>
void ParamStore<S>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename S>
void ParamStore<S>::reset_optimizer() {
  for (auto& e : entries_) {
    std::fill(e.first_moment.begin(), e.first_moment.end(), S(0));
    std::fill(e.second_moment.begin(), e.second_moment.end(), S(0));
  }
  step_ = 0;
}

template <typename S>
AdamWStats adamw_step(ParamStore<S>& params, const AdamWConfig& config) {
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  AdamWStats stats;
  double sq = 0.0;
  for (const auto& e : params.entries()) {
    if (!e.tensor.has_grad()) continue;
    for (S g : e.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  stats.grad_norm = std::sqrt(sq);
  if (!std::isfinite(stats.grad_norm)) throw NumericError("non-finite gradient norm");
  if (config.clip_norm > 0.0 && stats.grad_norm > config.clip_norm) {
    stats.clip_scale = config.clip_norm / stats.grad_norm;
  }
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.lr * config.weight_decay;
  for (auto& e : params.entries()) {
    auto value = e.tensor.mutable_data();
    const bool has = e.tensor.has_grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = has ? static_cast<double>(e.tensor.grad()[i]) * stats.clip_scale : 0.0;
      const double m = config.beta1 * e.first_moment[i] + (1.0 - config.beta1) * g;
      const double v = config.beta2 * e.second_moment[i] + (1.0 - config.beta2) * g * g;
      e.first_moment[i] = static_cast<S>(m);
      e.second_moment[i] = static_cast<S>(v);
      const double update = (m / bc1) / (std::sqrt(v / bc2) + config.eps);
      value[i] = static_cast<S>(static_cast<double>(value[i]) * decay - config.lr * update);
    }
  }
  return stats;
}

template class ParamStore<float>;
template class ParamStore<double>;
template AdamWStats adamw_step<float>(ParamStore<float>&, const AdamWConfig&);
template AdamWStats adamw_step<double>(ParamStore<double>&, const AdamWConfig&);

}  // namespace maskscribe::nn
