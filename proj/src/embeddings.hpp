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

#ifndef KBVQA_EMBEDDINGS_HPP_
#define KBVQA_EMBEDDINGS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

namespace kbvqa {

class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = 300);

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  // Returns false (and keeps the existing entry) when `word` is present.
  // Throws kDimension on a wrong length and kNonFinite on NaN/inf.
  bool insert(const std::string& word, Eigen::VectorXd vector);
  const Eigen::VectorXd* find(const std::string& word) const;

  // Words in insertion order.
  const std::vector<std::string>& words() const { return order_; }

  bool operator==(const EmbeddingTable& other) const;

 private:
  int dim_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
  std::vector<std::string> order_;
};

struct LabelVector {
  Eigen::VectorXd values;
  // Fraction of the label's words found in the table.
  double coverage = 0.0;
};

// Text vectors, one `word v1 ... vdim` per line. First occurrence wins.
EmbeddingTable load_embeddings(std::istream& in, int expected_dim);
std::string serialize_embeddings(const EmbeddingTable& table);

// Mean of the in-table word vectors of a label split on spaces and
// underscores; zero vector with coverage 0 when nothing is covered.
LabelVector embed_label(const std::string& label, const EmbeddingTable& table);

// Row i is embed_label(labels[i]).values.
Eigen::MatrixXd embed_items(const std::vector<std::string>& labels,
                            const EmbeddingTable& table);

// Deterministic pseudo-random vector for `word`; independent of which other
// words share the table. Components are N(0, 1/dim).
Eigen::VectorXd synthetic_vector(const std::string& word, int dim,
                                 std::uint64_t seed);
EmbeddingTable synthesize_table(const std::vector<std::string>& words, int dim,
                                std::uint64_t seed);

}  // namespace kbvqa

#endif  // KBVQA_EMBEDDINGS_HPP_
