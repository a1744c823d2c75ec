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

#include "maskscribe/error.h"

namespace maskscribe::vocab {

// Character alphabet: id 0 is the space, ids 1..26 are 'a'..'z'.
inline constexpr int kSpace = 0;
inline constexpr int kAlphabetSize = 27;

// Reserved ids, outside the text alphabet.
inline constexpr int kEos = 27;
inline constexpr int kPad = 28;
inline constexpr int kMask = 29;
inline constexpr int kVocabSize = 30;

enum class TokenRole { kText, kEos, kPad, kMask };

inline bool is_text(int id) { return id >= 0 && id < kAlphabetSize; }
inline bool is_reserved(int id) { return id == kEos || id == kPad || id == kMask; }

inline TokenRole role_of(int id) {
  if (is_text(id)) return TokenRole::kText;
  switch (id) {
    case kEos: return TokenRole::kEos;
    case kPad: return TokenRole::kPad;
    case kMask: return TokenRole::kMask;
    default: throw VocabError("token id out of vocabulary: " + std::to_string(id));
  }
}

}  // namespace maskscribe::vocab
