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

#include <functional>
#include <string>
#include <vector>

#include "maskscribe/nn/params.h"

namespace maskscribe::nn {

struct GradCheckEntry {
  std::string name;
  std::size_t elements_checked = 0;
  double max_abs_diff = 0.0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked elements.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares tape gradients of `loss` against central finite differences,
// perturbing each parameter element by +/- eps. Double precision only.
// `max_elements_per_param` of 0 checks every element; otherwise an evenly
// strided subset of that many elements is checked per parameter.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, ParamStore<double>& params,
                           double eps = 1e-4, double tolerance = 1e-3,
                           std::size_t max_elements_per_param = 0);

}  // namespace maskscribe::nn
