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

namespace maskscribe::nn {

// c[m x n] (+)= a[m x k] * b[k x n], all row-major and contiguous.
//
// Every output row is accumulated over k in a fixed order that does not
// depend on m or on which other rows share the call, so stacking inputs
// into one call gives bit-identical rows to separate calls.
template <typename S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate = false);

// out[n x m] = in[m x n]^T
template <typename S>
void transpose(const S* in, S* out, std::size_t m, std::size_t n);

}  // namespace maskscribe::nn
