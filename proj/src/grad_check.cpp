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

#include "maskscribe/nn/grad_check.h"

#include <algorithm>
#include <cmath>

namespace maskscribe::nn {

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, ParamStore<double>& params,
                           double eps, double tolerance, std::size_t max_elements_per_param) {
  params.zero_grad();
  backward(loss());

  GradCheckReport report;
  report.tolerance = tolerance;
  NoGradGuard no_grad;
  for (auto& entry : params.entries()) {
    Tensor<double>& t = entry.tensor;
    const std::size_t n = t.size();
    const std::size_t stride =
        max_elements_per_param == 0 || n <= max_elements_per_param ? 1
                                                                    : n / max_elements_per_param;
    GradCheckEntry out;
    out.name = entry.name;
    double diff_sq = 0.0, ana_sq = 0.0, num_sq = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      auto values = t.mutable_data();
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = loss().item();
      values[i] = saved - eps;
      const double minus = loss().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
      out.max_abs_diff = std::max(out.max_abs_diff, std::abs(numeric - analytic));
      diff_sq += (numeric - analytic) * (numeric - analytic);
      ana_sq += analytic * analytic;
      num_sq += numeric * numeric;
      ++out.elements_checked;
    }
    const double denom = std::max({std::sqrt(ana_sq), std::sqrt(num_sq), 1e-7});
    out.rel_error = std::sqrt(diff_sq) / denom;
    report.max_rel_error = std::max(report.max_rel_error, out.rel_error);
    report.entries.push_back(std::move(out));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace maskscribe::nn
