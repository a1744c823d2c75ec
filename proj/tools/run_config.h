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
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace maskscribe::cli {

struct KeySpec {
  const char* key;
  const char* default_value;
  const char* help;
  bool is_flag = false;
};

// Every recognised key with its default, in echo order.
const std::vector<KeySpec>& key_specs();

// Flat key/value run configuration. Values come from defaults, then a
// config file, then command-line flags; later sources win.
class RunConfig {
 public:
  RunConfig();

  // Reads "key = value" lines; '#' starts a comment. Unknown keys and
  // malformed lines throw UsageError.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value, const std::string& source);

  bool has(const std::string& key) const;
  const std::string& source(const std::string& key) const;

  std::string str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::pair<int, int> range(const std::string& key) const;  // "lo:hi"

  // "key = value  # source" per key.
  void echo(std::ostream& out) const;

 private:
  struct Entry {
    std::string key, value, source;
  };
  Entry& find(const std::string& key);
  const Entry& find(const std::string& key) const;
  std::vector<Entry> entries_;
};

// Flag spelling of a key: --block-size for block_size.
std::string flag_name(const std::string& key);

}  // namespace maskscribe::cli
