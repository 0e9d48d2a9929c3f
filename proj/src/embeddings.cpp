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

#include "embeddings.hpp"

#include <cmath>

#include "common.hpp"

namespace kbvqa {

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim) {
  if (dim < 1) throw Error(ErrorKind::kDimension, "embedding dim must be positive");
}

bool EmbeddingTable::insert(const std::string& word, Eigen::VectorXd vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorKind::kDimension,
                "vector for '" + word + "' has " + std::to_string(vector.size()) +
                    " components, expected " + std::to_string(dim_));
  }
  if (!vector.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "vector for '" + word + "' is not finite");
  }
  if (vectors_.contains(word)) return false;
  vectors_.emplace(word, std::move(vector));
  order_.push_back(word);
  return true;
}

const Eigen::VectorXd* EmbeddingTable::find(const std::string& word) const {
  auto it = vectors_.find(word);
  return it == vectors_.end() ? nullptr : &it->second;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  if (dim_ != other.dim_ || order_ != other.order_) return false;
  for (const std::string& w : order_) {
    if (*find(w) != *other.find(w)) return false;
  }
  return true;
}

EmbeddingTable load_embeddings(std::istream& in, int expected_dim) {
  EmbeddingTable table(expected_dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < view.size()) {
      std::size_t end = view.find_first_of(" \t", pos);
      if (end == std::string_view::npos) end = view.size();
      if (end > pos) fields.push_back(view.substr(pos, end - pos));
      pos = end + 1;
    }
    if (fields.size() != static_cast<std::size_t>(expected_dim) + 1) {
      throw ParseError(ErrorKind::kDimension, line_no,
                       "expected " + std::to_string(expected_dim) + " components, got " +
                           std::to_string(fields.size() - 1));
    }
    Eigen::VectorXd v(expected_dim);
    for (int i = 0; i < expected_dim; ++i) {
      try {
        v[i] = parse_double(fields[static_cast<std::size_t>(i) + 1]);
      } catch (const Error& e) {
        throw ParseError(ErrorKind::kParse, line_no, e.what());
      }
    }
    try {
      table.insert(std::string(fields[0]), std::move(v));
    } catch (const Error& e) {
      throw ParseError(e.kind(), line_no, e.what());
    }
  }
  return table;
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  std::string out;
  for (const std::string& word : table.words()) {
    out += word;
    for (double x : *table.find(word)) {
      out += ' ';
      out += format_double(x);
    }
    out += '\n';
  }
  return out;
}

LabelVector embed_label(const std::string& label, const EmbeddingTable& table) {
  LabelVector out{Eigen::VectorXd::Zero(table.dim()), 0.0};
  int words = 0;
  int found = 0;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    ++words;
    if (const Eigen::VectorXd* v = table.find(current)) {
      out.values += *v;
      ++found;
    }
    current.clear();
  };
  for (char c : label) {
    if (c == ' ' || c == '_') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  if (found > 0) {
    out.values /= found;
    out.coverage = static_cast<double>(found) / words;
  }
  return out;
}

Eigen::MatrixXd embed_items(const std::vector<std::string>& labels,
                            const EmbeddingTable& table) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(labels.size()), table.dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = embed_label(labels[i], table).values.transpose();
  }
  return out;
}

Eigen::VectorXd synthetic_vector(const std::string& word, int dim,
                                 std::uint64_t seed) {
  Rng rng(hash_string(word, seed));
  Eigen::VectorXd v(dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < dim; ++i) v[i] = rng.normal() * scale;
  return v;
}

EmbeddingTable synthesize_table(const std::vector<std::string>& words, int dim,
                                std::uint64_t seed) {
  EmbeddingTable table(dim);
  for (const std::string& w : words) {
    if (!table.find(w)) table.insert(w, synthetic_vector(w, dim, seed));
  }
  return table;
}

}  // namespace kbvqa
