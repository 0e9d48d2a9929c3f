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

#include <gtest/gtest.h>

#include <cmath>

#include "reasoner.hpp"
#include "test_util.hpp"

namespace kbvqa {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::kind_of;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MatrixXd mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> v) {
  MatrixXd m(rows, cols);
  auto it = v.begin();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = *it++;
  }
  return m;
}

HyperParams fixture_hp() {
  HyperParams hp;
  hp.d = 2;
  hp.p = 1;
  hp.answer_count = 2;
  hp.word_dim = 2;
  hp.knowledge_dim = 2;
  return hp;
}

// Two-dimensional cell with hand-set weights.
CellParams fixture_cell() {
  CellParams c = init_branch(fixture_hp(), 1).cell;
  c.ctl_w = {MatrixXd::Identity(2, 2)};
  c.ctl_b = {VectorXd::Zero(2)};
  c.ctl_u = vec({1, 1});
  c.k_w = MatrixXd::Identity(2, 2);
  c.m_w = MatrixXd::Identity(2, 2);
  c.i_w = mat(2, 4, {1, 0, 0, 0, 0, 0, 0, 1});
  c.read_u = vec({1, 1});
  c.wr_w = mat(2, 4, {1, 0, 0, 1, 0, 1, 1, 0});
  c.wr_b = vec({0.5, -0.5});
  c.gate_u = vec({1, 0});
  c.gate_b = vec({0});
  c.m0 = vec({1, 0});
  c.out1_w = mat(2, 4, {1, 0, 0, 1, 0, -1, 1, 0});
  c.out1_b = vec({0, 0.1});
  c.out2_w = mat(2, 2, {1, 2, -1, 0.5});
  c.out2_b = vec({0.1, -0.2});
  return c;
}

QuestionEncoding fixture_encoding() {
  return {mat(3, 2, {1, 0, 0, 1, 1, 1}), vec({1, 2})};
}

void expect_near(const VectorXd& got, const VectorXd& want, double tol = 1e-14) {
  ASSERT_EQ(got.size(), want.size());
  for (Eigen::Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << i;
}

TEST(Reasoner, EncoderShapes) {
  HyperParams hp;
  hp.d = 6;
  hp.word_dim = 4;
  BranchParams b = init_branch(hp, 3);
  Rng rng(1);
  MatrixXd tokens = MatrixXd::NullaryExpr(5, 4, [&] { return rng.normal(); });
  QuestionEncoding e = encode_question(tokens, b.encoder);
  EXPECT_EQ(e.cw.rows(), 5);
  EXPECT_EQ(e.cw.cols(), 6);
  EXPECT_EQ(e.q.size(), 6);
  QuestionEncoding one = encode_question(MatrixXd(tokens.topRows(1)), b.encoder);
  EXPECT_EQ(one.cw.rows(), 1);
  QuestionEncoding again = encode_question(tokens, b.encoder);
  EXPECT_EQ(again.cw, e.cw);
  EXPECT_EQ(again.q, e.q);
}

TEST(Reasoner, EncoderRejectsEmptyQuestion) {
  BranchParams b = init_branch(HyperParams{}, 3);
  EXPECT_EQ(kind_of([&] { encode_question(MatrixXd(0, 16), b.encoder); }), ErrorKind::kContract);
}

TEST(Reasoner, ControlFixture) {
  AttentionResult r = control_step(fixture_encoding(), fixture_cell(), 1);
  expect_near(r.attention, vec({0.09003057317038046, 0.24472847105479764, 0.6652409557748218}));
  expect_near(r.value, vec({0.7552715289452022, 0.9099694268296195}));
}

TEST(Reasoner, ControlSingleTokenAndSymmetry) {
  CellParams c = fixture_cell();
  QuestionEncoding single{mat(1, 2, {0.3, -0.7}), vec({1, 2})};
  AttentionResult r = control_step(single, c, 1);
  EXPECT_EQ(r.attention[0], 1.0);
  EXPECT_EQ(r.value, vec({0.3, -0.7}));
  QuestionEncoding same{mat(4, 2, {1, 2, 1, 2, 1, 2, 1, 2}), vec({1, 2})};
  r = control_step(same, c, 1);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(r.attention[i], 0.25);
  EXPECT_EQ(kind_of([&] { control_step(same, c, 2); }), ErrorKind::kContract);
}

TEST(Reasoner, ReadFixture) {
  CellParams c = fixture_cell();
  MacState state{VectorXd::Zero(2), vec({1, 0}), 0};
  AttentionResult r = read_step(state, vec({0.7552715289452022, 0.9099694268296195}),
                                mat(2, 2, {1, 2, 3, -1}), c);
  expect_near(r.attention, vec({0.7719518211033488, 0.2280481788966513}));
  expect_near(r.value, vec({1.4560963577933026, 1.3158554633100463}));
}

TEST(Reasoner, ReadSingleItemAndDuplicates) {
  CellParams c = fixture_cell();
  MacState state{VectorXd::Zero(2), vec({0.2, 0.4}), 0};
  AttentionResult r = read_step(state, vec({1, -1}), mat(1, 2, {5, 6}), c);
  EXPECT_EQ(r.attention[0], 1.0);
  EXPECT_EQ(r.value, vec({5, 6}));
  r = read_step(state, vec({1, -1}), mat(3, 2, {1, 2, 1, 2, 0, 1}), c);
  EXPECT_EQ(r.attention[0], r.attention[1]);
}

TEST(Reasoner, ReadEmptyKnowledgeUsesNullVector) {
  CellParams c = fixture_cell();
  MacState state{VectorXd::Zero(2), vec({1, 0}), 0};
  AttentionResult r = read_step(state, vec({1, 1}), MatrixXd(0, 2), c);
  EXPECT_EQ(r.value, c.read_null);
  EXPECT_EQ(r.attention.size(), 0);
}

TEST(Reasoner, WriteFixture) {
  CellParams c = fixture_cell();
  MacState state{VectorXd::Zero(2), vec({1, 2}), 0};
  const double g = 1.0 / (1.0 + std::exp(-1.0));
  VectorXd want = g * vec({1, 2}) + (1 - g) * vec({5.5, 4.5});
  expect_near(write_step(state, vec({3, 4}), vec({1, 0}), c), want);
}

TEST(Reasoner, WriteGateExtremes) {
  CellParams c = fixture_cell();
  MacState state{VectorXd::Zero(2), vec({1, 2}), 0};
  c.gate_b = vec({1000});
  EXPECT_EQ(write_step(state, vec({3, 4}), vec({1, 0}), c), vec({1, 2}));
  c.gate_b = vec({-1000});
  EXPECT_EQ(write_step(state, vec({3, 4}), vec({1, 0}), c), vec({5.5, 4.5}));
}

TEST(Reasoner, EndToEndFixture) {
  VectorXd logits =
      run_branch(fixture_encoding(), mat(2, 2, {1, 2, 3, -1}), fixture_cell(), fixture_hp());
  expect_near(logits, vec({4.444676263564746, -3.245879566350005}), 1e-13);
}

TEST(Reasoner, SingleStepComposesUnits) {
  HyperParams hp;
  hp.d = 5;
  hp.p = 1;
  hp.word_dim = 3;
  hp.knowledge_dim = 4;
  hp.answer_count = 3;
  BranchParams b = init_branch(hp, 8);
  Rng rng(2);
  MatrixXd tokens = MatrixXd::NullaryExpr(4, 3, [&] { return rng.normal(); });
  MatrixXd knowledge = MatrixXd::NullaryExpr(3, 4, [&] { return rng.normal(); });
  QuestionEncoding enc = encode_question(tokens, b.encoder);
  VectorXd logits = run_branch(enc, knowledge, b.cell, hp);
  EXPECT_EQ(logits.size(), 3);

  AttentionResult c = control_step(enc, b.cell, 1);
  MacState s0{VectorXd::Zero(5), b.cell.m0, 0};
  MatrixXd projected = knowledge * b.cell.k_w.transpose();
  AttentionResult r = read_step(s0, c.value, projected, b.cell);
  VectorXd m = write_step(s0, r.value, c.value, b.cell);
  VectorXd mq(10);
  mq << m, enc.q;
  VectorXd h = b.cell.out1_w * mq + b.cell.out1_b;
  h = h.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
  expect_near(logits, b.cell.out2_w * h + b.cell.out2_b, 1e-12);
}

TEST(Reasoner, AttentionsAreDistributions) {
  HyperParams hp;
  hp.d = 8;
  hp.p = 3;
  hp.word_dim = 5;
  hp.knowledge_dim = 5;
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    BranchParams b = init_branch(hp, static_cast<std::uint64_t>(trial));
    const Eigen::Index S = 1 + static_cast<Eigen::Index>(rng.index(10));
    const Eigen::Index E = 1 + static_cast<Eigen::Index>(rng.index(10));
    MatrixXd tokens = MatrixXd::NullaryExpr(S, 5, [&] { return 3 * rng.normal(); });
    MatrixXd knowledge = MatrixXd::NullaryExpr(E, 5, [&] { return 3 * rng.normal(); });
    BranchTrace t;
    forward_branch(tokens, knowledge, b.encoder, b.cell, hp, t);
    ASSERT_EQ(t.steps.size(), 3u);
    for (const BranchTrace::Step& st : t.steps) {
      EXPECT_NEAR(st.control_attn.sum(), 1.0, 1e-12);
      EXPECT_NEAR(st.read_attn.sum(), 1.0, 1e-12);
      EXPECT_GE(st.control_attn.minCoeff(), 0.0);
      EXPECT_GE(st.read_attn.minCoeff(), 0.0);
    }
  }
}

TEST(Reasoner, InitIsDeterministicAndBounded) {
  HyperParams hp;
  BranchParams a = init_branch(hp, 4);
  BranchParams b = init_branch(hp, 4);
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    TensorRef ta = a.tensors()[i];
    TensorRef tb = b.tensors()[i];
    ASSERT_EQ(ta.size(), tb.size());
    for (Eigen::Index k = 0; k < ta.size(); ++k) {
      EXPECT_EQ(ta.data[k], tb.data[k]);
      EXPECT_LE(std::abs(ta.data[k]), 0.08);
    }
  }
}

TEST(Reasoner, ValidateHyperParams) {
  HyperParams hp;
  hp.d = 1;
  EXPECT_EQ(kind_of([&] { validate(hp); }), ErrorKind::kConfig);
  hp = HyperParams{};
  hp.p = 0;
  EXPECT_EQ(kind_of([&] { validate(hp); }), ErrorKind::kConfig);
  hp = HyperParams{};
  hp.answer_count = 1;
  EXPECT_EQ(kind_of([&] { validate(hp); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace kbvqa
