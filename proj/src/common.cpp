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

#include "common.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <system_error>

namespace kbvqa {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kDuplicateKey: return "duplicate key";
    case ErrorKind::kReference: return "reference error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kCorrupt: return "corrupt data";
  }
  return "error";
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char delim) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(delim, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(text.substr(start));
      break;
    }
    parts.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view text) {
  const char* ws = " \t\r\n";
  std::size_t b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  std::size_t e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::string read_all(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return read_all(in);
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error(ErrorKind::kIo, "short write to " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw Error(ErrorKind::kIo,
                "cannot rename into " + path.string() + ": " + ec.message());
  }
}

void write_files_atomic(
    const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
  std::vector<std::filesystem::path> staged;
  auto discard = [&] {
    std::error_code ignored;
    for (const auto& t : staged) std::filesystem::remove(t, ignored);
  };
  for (const auto& [path, contents] : files) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      discard();
      throw Error(ErrorKind::kIo, "cannot write " + path.string());
    }
    staged.push_back(tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      discard();
      throw Error(ErrorKind::kIo, "short write to " + path.string());
    }
  }
  namespace fs = std::filesystem;
  for (const auto& [path, contents] : files) {
    if (fs::is_directory(path)) {
      discard();
      throw Error(ErrorKind::kIo, "cannot write " + path.string() + ": is a directory");
    }
  }
  // Previous versions are set aside so a failed rename can restore them.
  std::vector<fs::path> backups(files.size());
  std::size_t done = 0;
  std::error_code ec;
  for (; done < files.size(); ++done) {
    const fs::path& target = files[done].first;
    if (fs::exists(target)) {
      backups[done] = target;
      backups[done] += ".bak";
      fs::rename(target, backups[done], ec);
      if (ec) {
        backups[done].clear();
        break;
      }
    }
    fs::rename(staged[done], target, ec);
    if (ec) break;
  }
  if (ec) {
    std::error_code ignored;
    for (std::size_t i = 0; i <= done && i < files.size(); ++i) {
      if (i < done) fs::remove(files[i].first, ignored);
      if (!backups[i].empty()) fs::rename(backups[i], files[i].first, ignored);
    }
    discard();
    throw Error(ErrorKind::kIo, "cannot rename into " + files[done].first.string() + ": " +
                                    ec.message());
  }
  for (const fs::path& b : backups) {
    if (!b.empty()) fs::remove(b, ec);
  }
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorKind::kNonFinite, "format_double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorKind::kParse, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view text, std::uint64_t seed) {
  // FNV-1a, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h ^ mix64(seed + 0x9e3779b97f4a7c15ULL));
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace kbvqa
