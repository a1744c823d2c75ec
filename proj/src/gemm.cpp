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

#include "maskscribe/nn/gemm.h"

#include <algorithm>
#include <cstring>

namespace maskscribe::nn {
namespace {

// Rows per register tile and columns per chunk (one 512-bit lane group of
// four vectors).
constexpr std::size_t kRowBlock = 4;

template <typename S>
constexpr std::size_t col_block() {
  return 256 / sizeof(S);
}

template <typename S, std::size_t R>
void tile(const S* a, const S* b, S* c, std::size_t k, std::size_t n, std::size_t j0,
          bool accumulate) {
  constexpr std::size_t kCB = col_block<S>();
  S acc[R][kCB];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < kCB; ++j) acc[r][j] = S(0);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const S* brow = b + p * n + j0;
    for (std::size_t r = 0; r < R; ++r) {
      const S av = a[r * k + p];
      for (std::size_t j = 0; j < kCB; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    S* crow = c + r * n + j0;
    if (accumulate) {
      for (std::size_t j = 0; j < kCB; ++j) crow[j] += acc[r][j];
    } else {
      std::memcpy(crow, acc[r], kCB * sizeof(S));
    }
  }
}

// Column tail narrower than one chunk; same per-element accumulation order.
template <typename S>
void tail(const S* a, const S* b, S* c, std::size_t k, std::size_t n, std::size_t j0,
          std::size_t width, bool accumulate) {
  constexpr std::size_t kCB = col_block<S>();
  S acc[kCB];
  for (std::size_t j = 0; j < width; ++j) acc[j] = S(0);
  for (std::size_t p = 0; p < k; ++p) {
    const S* brow = b + p * n + j0;
    const S av = a[p];
    for (std::size_t j = 0; j < width; ++j) acc[j] += av * brow[j];
  }
  for (std::size_t j = 0; j < width; ++j) {
    c[j0 + j] = accumulate ? c[j0 + j] + acc[j] : acc[j];
  }
}

}  // namespace

template <typename S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  constexpr std::size_t kCB = col_block<S>();
  const std::size_t full = n - n % kCB;
  std::size_t i = 0;
  for (; i + kRowBlock <= m; i += kRowBlock) {
    for (std::size_t j0 = 0; j0 < full; j0 += kCB) {
      tile<S, kRowBlock>(a + i * k, b, c + i * n, k, n, j0, accumulate);
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j0 = 0; j0 < full; j0 += kCB) {
      tile<S, 1>(a + i * k, b, c + i * n, k, n, j0, accumulate);
    }
  }
  if (full < n) {
    for (std::size_t r = 0; r < m; ++r) {
      tail(a + r * k, b, c + r * n, k, n, full, n - full, accumulate);
    }
  }
}

template <typename S>
void transpose(const S* in, S* out, std::size_t m, std::size_t n) {
  constexpr std::size_t kB = 16;
  for (std::size_t i0 = 0; i0 < m; i0 += kB) {
    for (std::size_t j0 = 0; j0 < n; j0 += kB) {
      const std::size_t i1 = std::min(m, i0 + kB), j1 = std::min(n, j0 + kB);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
      }
    }
  }
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void transpose<float>(const float*, float*, std::size_t, std::size_t);
template void transpose<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace maskscribe::nn
