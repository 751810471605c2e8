// Copyright 2026 The TFIQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TFIQA_COMMON_HPP_
#define TFIQA_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace tfiqa {

// Error taxonomy. The CLI maps these onto its exit-code contract:
// IoError -> 2, ModeMismatchError -> 3, ConfigError -> 4, anything else -> 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input values or violated preconditions (shape mismatch, invalid
// distribution, out-of-range label, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced or consumed where finite math is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File-system and decode failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown keys, inconsistent presets, missing flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint trained for one mode used in an incompatible one.
class ModeMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace tfiqa

#endif  // TFIQA_COMMON_HPP_
