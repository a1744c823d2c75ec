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

#include "run_config.h"

#include <algorithm>
#include <fstream>

#include "maskscribe/error.h"

namespace maskscribe::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw UsageError("configuration key '" + key + "' expects " + want + ", got '" + value + "'");
}

}  // namespace

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", "1", "root seed for every random stream"},
      {"threads", "0", "worker cap for per-sample parallelism (0 = all cores)"},
      // data
      {"data", "data", "dataset directory holding train/val/test .tsv files"},
      {"out", "", "output path (directory for gen-data, file otherwise)"},
      {"canvas_length", "32", "canvas cells T"},
      {"noise", "0.05", "per-frame viseme substitution probability"},
      {"jitter", "1:3", "frames per character, inclusive range lo:hi"},
      {"frame_rate", "25", "frames per second of the viseme channel"},
      {"train_size", "20000", "training samples"},
      {"val_size", "1000", "validation samples"},
      {"test_size", "1000", "test samples"},
      {"split", "test", "split to decode: train, val or test"},
      {"limit", "0", "decode only the first N samples (0 = all)"},
      // models
      {"width", "128", "denoiser width"},
      {"heads", "4", "denoiser attention heads"},
      {"ff_width", "512", "denoiser feed-forward width"},
      {"blocks", "2", "denoiser transformer blocks"},
      {"cond_window", "7", "local mixing window of the denoiser's clip encoder, in rows"},
      {"cond_blocks", "1", "self-attention blocks in the denoiser's clip encoder"},
      {"max_cond_length", "64", "longest conditioning sequence after downsampling"},
      {"max_length", "31", "largest transcript length the length predictor can output"},
      {"lp_width", "128", "length predictor width"},
      {"lp_heads", "4", "length predictor attention heads"},
      {"lp_ff_width", "512", "length predictor feed-forward width"},
      {"lp_layers", "2", "length predictor layers"},
      {"lp_window", "7", "local mixing window of the length predictor's clip encoder"},
      {"lp_dropout", "0.1", "length predictor dropout"},
      // training
      {"stage", "1", "training stage: 1 (text + EOS) or 2 (full canvas)"},
      {"length_predictor", "false", "train the length predictor instead of the denoiser", true},
      {"init", "", "stage-1 checkpoint to start stage 2 from"},
      {"steps", "0", "optimizer steps (0 = stage default: 3000 / 500)"},
      {"lr", "0", "peak learning rate (0 = stage default: 1e-3 / 5e-4)"},
      {"batch_size", "32", "samples per step"},
      {"clip_norm", "1", "global gradient-norm clip"},
      {"weight_decay", "0.01", "AdamW decoupled weight decay"},
      {"lp_steps", "10000", "length predictor optimizer steps"},
      {"lp_lr", "1e-3", "length predictor peak learning rate"},
      {"curve", "", "loss curve CSV (default: <out>.loss.csv)"},
      // decoding
      {"mode", "length-guided", "decoding mode: implicit, oracle or length-guided"},
      {"checkpoint", "", "denoiser checkpoint"},
      {"length_checkpoint", "", "length predictor checkpoint"},
      {"stage1", "", "stage-1 denoiser checkpoint (eval)"},
      {"stage2", "", "stage-2 denoiser checkpoint (eval)"},
      {"threshold", "0.9", "commit cells whose confidence exceeds this"},
      {"block_size", "32", "decoding block size"},
      {"radius", "5", "length window radius R"},
      {"lambda", "0.9", "rerank weight of the length log-probability"},
      {"beta", "0.7", "rerank penalty per denoising iteration"},
      {"lambda_only", "-1", "lambda for the rerank row without penalty (-1 = same as lambda)"},
      {"trace", "", "write per-iteration decode traces here"},
      {"sample", "0", "sample index for the trace command"},
      {"rtf_samples", "0", "time this many samples per decoding mode (0 = skip)"},
  };
  return specs;
}

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

RunConfig::RunConfig() {
  for (const auto& entry : key_specs()) entries_.push_back({entry.key, entry.default_value, "default"});
}

RunConfig::Entry& RunConfig::find(const std::string& key) {
  for (auto& e : entries_) {
    if (e.key == key) return e;
  }
  throw UsageError("unknown configuration key '" + key + "'");
}

const RunConfig::Entry& RunConfig::find(const std::string& key) const {
  return const_cast<RunConfig*>(this)->find(key);
}

bool RunConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.key == key; });
}

const std::string& RunConfig::source(const std::string& key) const { return find(key).source; }

void RunConfig::set(const std::string& key, const std::string& value, const std::string& source) {
  auto& e = find(key);
  e.value = value;
  e.source = source;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!has(key)) {
      throw UsageError(path.string() + ":" + std::to_string(n) + ": unknown key '" + key + "'");
    }
    set(key, trim(line.substr(eq + 1)), "file");
  }
}

std::string RunConfig::str(const std::string& key) const { return find(key).value; }

std::size_t RunConfig::size(const std::string& key) const {
  const auto& v = find(key).value;
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
  if (used != v.size() || v.find('-') != std::string::npos) {
    bad_value(key, v, "a non-negative integer");
  }
  return std::size_t(out);
}

std::uint64_t RunConfig::u64(const std::string& key) const { return size(key); }

double RunConfig::real(const std::string& key) const {
  const auto& v = find(key).value;
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size()) bad_value(key, v, "a number");
  return out;
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = find(key).value;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::pair<int, int> RunConfig::range(const std::string& key) const {
  const auto& v = find(key).value;
  const auto colon = v.find(':');
  try {
    if (colon == std::string::npos) {
      const int x = std::stoi(v);
      return {x, x};
    }
    return {std::stoi(v.substr(0, colon)), std::stoi(v.substr(colon + 1))};
  } catch (const std::exception&) {
    bad_value(key, v, "lo:hi");
  }
}

void RunConfig::echo(std::ostream& out) const {
  out << "# effective configuration\n";
  for (const auto& e : entries_) {
    out << "# " << e.key << " = " << e.value << "  (" << e.source << ")\n";
  }
}

}  // namespace maskscribe::cli
