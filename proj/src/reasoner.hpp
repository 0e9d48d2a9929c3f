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

#ifndef KBVQA_REASONER_HPP_
#define KBVQA_REASONER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "embeddings.hpp"

namespace kbvqa {

struct HyperParams {
  int d = 32;              // hidden size
  int p = 4;               // reasoning steps
  int answer_count = 2;
  int word_dim = 16;       // question token embedding size
  int knowledge_dim = 16;  // knowledge row size
  std::uint64_t seed = 1;

  bool operator==(const HyperParams&) const = default;
};

// Throws kConfig when an invariant (d >= 2, p >= 1, answer_count >= 2, dims
// positive) fails.
void validate(const HyperParams& hp);

// A named view of one parameter tensor (column-major storage).
struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

// Bidirectional gated recurrent question encoder. Gate blocks are stacked
// [update; reset; candidate].
struct EncoderParams {
  Eigen::MatrixXd in_w;  // d x word_dim
  Eigen::VectorXd in_b;
  Eigen::MatrixXd fw_wx, fw_uh;  // 3d x d
  Eigen::VectorXd fw_b;          // 3d
  Eigen::MatrixXd bw_wx, bw_uh;
  Eigen::VectorXd bw_b;
  Eigen::MatrixXd q_w;  // d x 2d
  Eigen::VectorXd q_b;

  std::vector<TensorRef> tensors();
};

// Control, read, write and output units of one reasoning branch.
struct CellParams {
  std::vector<Eigen::MatrixXd> ctl_w;  // p of d x d
  std::vector<Eigen::VectorXd> ctl_b;  // p of d
  Eigen::VectorXd ctl_u;
  Eigen::MatrixXd k_w;  // d x knowledge_dim
  Eigen::MatrixXd m_w;  // d x d
  Eigen::MatrixXd i_w;  // d x 2d
  Eigen::VectorXd read_u;
  Eigen::VectorXd read_null;  // read result for an empty knowledge stream
  Eigen::MatrixXd wr_w;       // d x 2d
  Eigen::VectorXd wr_b;
  Eigen::VectorXd gate_u;
  Eigen::VectorXd gate_b;  // 1
  Eigen::VectorXd m0;
  Eigen::MatrixXd out1_w;  // d x 2d
  Eigen::VectorXd out1_b;
  Eigen::MatrixXd out2_w;  // answer_count x d
  Eigen::VectorXd out2_b;

  std::vector<TensorRef> tensors();
};

struct BranchParams {
  EncoderParams encoder;
  CellParams cell;

  // Encoder tensors prefixed "encoder.", cell tensors "cell.".
  std::vector<TensorRef> tensors();
};

// Weights uniform in [-0.08, 0.08], biases zero, m0 and read_null uniform.
BranchParams init_branch(const HyperParams& hp, std::uint64_t seed);
BranchParams zeros_like(const BranchParams& params);
// Same shapes, every component set to zero; for reusing gradient buffers.
void set_zero(BranchParams& params);

struct QuestionEncoding {
  Eigen::MatrixXd cw;  // S x d contextual word states
  Eigen::VectorXd q;   // question summary
};

struct MacState {
  Eigen::VectorXd c;
  Eigen::VectorXd m;
  int step = 0;
};

struct AttentionResult {
  Eigen::VectorXd value;      // c_i for control, r_i for read
  Eigen::VectorXd attention;  // empty for a null read
};

// Rows of `tokens` are token embeddings (S x word_dim). Throws kContract when
// S == 0.
QuestionEncoding encode_question(const Eigen::MatrixXd& tokens, const EncoderParams& params);
QuestionEncoding encode_question(const std::vector<std::string>& tokens,
                                 const EmbeddingTable& table, const EncoderParams& params);

// `step` is 1-based.
AttentionResult control_step(const QuestionEncoding& enc, const CellParams& params, int step);
// `projected` holds the knowledge rows already mapped through k_w (E x d).
AttentionResult read_step(const MacState& state, const Eigen::VectorXd& control,
                          const Eigen::MatrixXd& projected, const CellParams& params);
Eigen::VectorXd write_step(const MacState& state, const Eigen::VectorXd& read,
                           const Eigen::VectorXd& control, const CellParams& params);

// Everything the backward pass needs from one branch evaluation.
struct BranchTrace {
  Eigen::MatrixXd tokens;  // S x word_dim
  Eigen::MatrixXd x;       // S x d projected tokens
  // Per direction, per position: h_prev, gates [z; r; n], Un*h_prev, h.
  struct Gru {
    std::vector<Eigen::VectorXd> h_prev, gates, un_h, h;
  } fw, bw;
  QuestionEncoding enc;
  Eigen::MatrixXd knowledge;  // E x knowledge_dim
  Eigen::MatrixXd projected;  // E x d
  struct Step {
    Eigen::VectorXd cq, control_attn, c;
    Eigen::VectorXd m_prev, mm, v, wv, read_attn, r;
    Eigen::VectorXd m_cand;
    double g = 0.0;
  };
  std::vector<Step> steps;
  Eigen::VectorXd m;  // final memory
  Eigen::VectorXd h1, z1, logits;
};

// Forward pass. `encoder` may differ from params.encoder when branches share a
// question encoder.
void forward_branch(const Eigen::MatrixXd& tokens, const Eigen::MatrixXd& knowledge,
                    const EncoderParams& encoder, const CellParams& cell,
                    const HyperParams& hp, BranchTrace& trace);

// Accumulates d(loss)/d(params) given d(loss)/d(logits) into the gradient
// buffers.
void backward_branch(const BranchTrace& trace, const Eigen::VectorXd& dlogits,
                     const EncoderParams& encoder, const CellParams& cell,
                     const HyperParams& hp, EncoderParams& encoder_grad,
                     CellParams& cell_grad);

// Answer logits for one question against one knowledge matrix.
Eigen::VectorXd run_branch(const QuestionEncoding& enc, const Eigen::MatrixXd& knowledge,
                           const CellParams& params, const HyperParams& hp);

}  // namespace kbvqa

#endif  // KBVQA_REASONER_HPP_
