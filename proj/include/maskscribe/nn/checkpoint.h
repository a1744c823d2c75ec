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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "maskscribe/nn/params.h"

namespace maskscribe::nn {

// On-disk layout (one file):
//
//   maskscribe-checkpoint 1
//   meta <n>
//   <key> <value>                      n lines, sorted by key
//   params <m>
//   <name> <rank> <dims...> <offset>   m lines; offset in bytes into payload
//   payload <bytes>
//   <little-endian float32 payload>
//
// Keys, values and names contain no whitespace.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<CheckpointEntry> entries;

  const std::string& meta_value(const std::string& key) const;
};

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename S>
Checkpoint to_checkpoint(const ParamStore<S>& params, std::map<std::string, std::string> meta);

// Copies checkpoint values into an already-built store. The name sets must
// match exactly and every shape must agree.
template <typename S>
void load_into(ParamStore<S>& params, const Checkpoint& checkpoint);

}  // namespace maskscribe::nn
