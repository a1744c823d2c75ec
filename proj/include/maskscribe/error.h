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

#include <stdexcept>
#include <string>

namespace maskscribe {

// Base of every error thrown by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class UsageError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };
class VocabError : public Error { using Error::Error; };
class ContractViolation : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class RerankError : public Error { using Error::Error; };
class DatasetError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class EvalError : public Error { using Error::Error; };

class CheckpointError : public Error {
 public:
  enum class Kind {
    kIo,
    kCorruptManifest,
    kUnknownParameter,
    kMissingParameter,
    kShapeMismatch,
    kTruncatedPayload,
  };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace maskscribe
