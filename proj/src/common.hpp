// Copyright 2026 The kbvqa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KBVQA_COMMON_HPP_
#define KBVQA_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kbvqa {

enum class ErrorKind {
  kParse,
  kSchema,
  kDuplicateKey,
  kReference,
  kDimension,
  kContract,
  kShape,
  kNonFinite,
  kConfig,
  kIo,
  kConsistency,
  kNotFound,
  kCorrupt,
};

const char* error_kind_name(ErrorKind kind);

// All library failures are reported through this one exception type; the
// kind decides the C API status (and therefore the CLI exit code).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Error raised while reading a line-oriented file. `line` is 1-based, 0 when
// the position is a byte offset instead.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string to_lower(std::string_view text);

// Splits on a single delimiter character, keeping empty fields.
std::vector<std::string> split(std::string_view text, char delim);

std::string_view trim(std::string_view text);

// Reads a whole stream into one string.
std::string read_all(std::istream& in);
std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames over `path`. Throws kIo.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);
// All-or-nothing variant: every file is staged before any is renamed into
// place, and staged files are removed on failure.
void write_files_atomic(
    const std::vector<std::pair<std::filesystem::path, std::string>>& files);

// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

// SplitMix64 mixing step; used to derive independent seeded streams.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view text, std::uint64_t seed = 0);

// Small deterministic generator whose output does not depend on the standard
// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }
  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace kbvqa

#endif  // KBVQA_COMMON_HPP_
