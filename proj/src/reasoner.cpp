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

#include "reasoner.hpp"

#include <cmath>

#include "common.hpp"

namespace kbvqa {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInitRange = 0.08;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

VectorXd sigmoid(const VectorXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// d(softmax)^T applied to an upstream gradient.
VectorXd softmax_backward(const VectorXd& a, const VectorXd& da) {
  return a.cwiseProduct(da - VectorXd::Constant(a.size(), a.dot(da)));
}

void fill_uniform(MatrixXd& m, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-kInitRange, kInitRange);
}
void fill_uniform(VectorXd& v, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-kInitRange, kInitRange);
}

MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  fill_uniform(m, rng);
  return m;
}
VectorXd uniform(Eigen::Index n, Rng& rng) {
  VectorXd v(n);
  fill_uniform(v, rng);
  return v;
}

TensorRef ref(std::string name, MatrixXd& m) { return {std::move(name), m.data(), m.rows(), m.cols()}; }
TensorRef ref(std::string name, VectorXd& v) { return {std::move(name), v.data(), v.size(), 1}; }

void run_gru(const MatrixXd& x, const MatrixXd& wx, const MatrixXd& uh, const VectorXd& b,
             bool reverse, BranchTrace::Gru& gru) {
  const Eigen::Index S = x.rows();
  const Eigen::Index d = x.cols();
  gru.h_prev.assign(S, VectorXd());
  gru.gates.assign(S, VectorXd());
  gru.un_h.assign(S, VectorXd());
  gru.h.assign(S, VectorXd());
  VectorXd h = VectorXd::Zero(d);
  for (Eigen::Index k = 0; k < S; ++k) {
    const Eigen::Index s = reverse ? S - 1 - k : k;
    VectorXd ax = wx * x.row(s).transpose() + b;
    VectorXd ah = uh * h;
    VectorXd gates(3 * d);
    gates.head(d) = sigmoid(ax.head(d) + ah.head(d));
    gates.segment(d, d) = sigmoid(ax.segment(d, d) + ah.segment(d, d));
    VectorXd un_h = ah.tail(d);
    gates.tail(d) = (ax.tail(d) + gates.segment(d, d).cwiseProduct(un_h)).array().tanh().matrix();
    VectorXd next = (VectorXd::Ones(d) - gates.head(d)).cwiseProduct(gates.tail(d)) +
                    gates.head(d).cwiseProduct(h);
    gru.h_prev[s] = h;
    gru.gates[s] = std::move(gates);
    gru.un_h[s] = std::move(un_h);
    gru.h[s] = next;
    h = std::move(next);
  }
}

// Backpropagates through one GRU direction. `dh` holds d(loss)/d(h_s) from
// outside the recurrence; d(loss)/d(x_s) is added to dx.
void gru_backward(const MatrixXd& x, const BranchTrace::Gru& gru, const MatrixXd& wx,
                  const MatrixXd& uh, bool reverse, const std::vector<VectorXd>& dh,
                  MatrixXd& dwx, MatrixXd& duh, VectorXd& db, MatrixXd& dx) {
  const Eigen::Index S = x.rows();
  const Eigen::Index d = x.cols();
  VectorXd carry = VectorXd::Zero(d);
  for (Eigen::Index k = S - 1; k >= 0; --k) {
    const Eigen::Index s = reverse ? S - 1 - k : k;
    const VectorXd& z = gru.gates[s].head(d);
    const VectorXd& r = gru.gates[s].segment(d, d);
    const VectorXd& n = gru.gates[s].tail(d);
    const VectorXd& h_prev = gru.h_prev[s];
    VectorXd g = dh[s] + carry;
    VectorXd dn = g.cwiseProduct(VectorXd::Ones(d) - z);
    VectorXd dz = g.cwiseProduct(h_prev - n);
    VectorXd da(3 * d);
    da.tail(d) = dn.cwiseProduct(VectorXd::Ones(d) - n.cwiseProduct(n));
    VectorXd dr = da.tail(d).cwiseProduct(gru.un_h[s]);
    da.head(d) = dz.cwiseProduct(z.cwiseProduct(VectorXd::Ones(d) - z));
    da.segment(d, d) = dr.cwiseProduct(r.cwiseProduct(VectorXd::Ones(d) - r));
    VectorXd du = da;
    du.tail(d) = da.tail(d).cwiseProduct(r);
    dwx.noalias() += da * x.row(s);
    db += da;
    duh.noalias() += du * h_prev.transpose();
    dx.row(s).noalias() += (wx.transpose() * da).transpose();
    carry = g.cwiseProduct(z);
    carry.noalias() += uh.transpose() * du;
  }
}

void encode_into(const MatrixXd& tokens, const EncoderParams& p, BranchTrace& t) {
  if (tokens.rows() == 0) {
    throw Error(ErrorKind::kContract, "encode_question: empty token list");
  }
  t.tokens = tokens;
  t.x = (tokens * p.in_w.transpose()).rowwise() + p.in_b.transpose();
  run_gru(t.x, p.fw_wx, p.fw_uh, p.fw_b, false, t.fw);
  run_gru(t.x, p.bw_wx, p.bw_uh, p.bw_b, true, t.bw);
  const Eigen::Index S = tokens.rows();
  const Eigen::Index d = p.in_w.rows();
  t.enc.cw.resize(S, d);
  for (Eigen::Index s = 0; s < S; ++s) t.enc.cw.row(s) = (t.fw.h[s] + t.bw.h[s]).transpose();
  VectorXd ends(2 * d);
  ends << t.fw.h[S - 1], t.bw.h[0];
  t.enc.q = p.q_w * ends + p.q_b;
}

void cell_forward(const MatrixXd& knowledge, const CellParams& p, const HyperParams& hp,
                  BranchTrace& t) {
  t.knowledge = knowledge;
  t.projected = knowledge * p.k_w.transpose();
  t.steps.assign(static_cast<std::size_t>(hp.p), {});
  MacState state{VectorXd::Zero(hp.d), p.m0, 0};
  for (int i = 1; i <= hp.p; ++i) {
    BranchTrace::Step& st = t.steps[static_cast<std::size_t>(i - 1)];
    st.cq = p.ctl_w[i - 1] * t.enc.q + p.ctl_b[i - 1];
    st.control_attn = softmax(t.enc.cw * p.ctl_u.cwiseProduct(st.cq));
    st.c = t.enc.cw.transpose() * st.control_attn;

    st.m_prev = state.m;
    if (t.projected.rows() == 0) {
      st.r = p.read_null;
      st.read_attn.resize(0);
    } else {
      st.mm = p.m_w * state.m;
      st.v = p.read_u.cwiseProduct(st.c);
      st.wv = p.i_w.transpose() * st.v;
      // score_e = wv . [mm * kp_e ; kp_e]
      VectorXd w_i = st.wv.head(hp.d).cwiseProduct(st.mm);
      VectorXd scores = t.projected * (w_i + st.wv.tail(hp.d));
      st.read_attn = softmax(scores);
      st.r = t.projected.transpose() * st.read_attn;
    }

    VectorXd joined(2 * hp.d);
    joined << st.r, state.m;
    st.m_cand = p.wr_w * joined + p.wr_b;
    st.g = sigmoid(p.gate_u.dot(st.c) + p.gate_b[0]);
    state.m = st.g * state.m + (1.0 - st.g) * st.m_cand;
    state.c = st.c;
    state.step = i;
  }
  t.m = state.m;
  VectorXd mq(2 * hp.d);
  mq << t.m, t.enc.q;
  t.h1 = p.out1_w * mq + p.out1_b;
  t.z1 = t.h1.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
  t.logits = p.out2_w * t.z1 + p.out2_b;
}

}  // namespace

void validate(const HyperParams& hp) {
  if (hp.d < 2) throw Error(ErrorKind::kConfig, "hidden size d must be >= 2");
  if (hp.p < 1) throw Error(ErrorKind::kConfig, "reasoning steps p must be >= 1");
  if (hp.answer_count < 2) throw Error(ErrorKind::kConfig, "answer_count must be >= 2");
  if (hp.word_dim < 1 || hp.knowledge_dim < 1) {
    throw Error(ErrorKind::kConfig, "word_dim and knowledge_dim must be positive");
  }
}

std::vector<TensorRef> EncoderParams::tensors() {
  return {ref("in_w", in_w),   ref("in_b", in_b),   ref("fw_wx", fw_wx), ref("fw_uh", fw_uh),
          ref("fw_b", fw_b),   ref("bw_wx", bw_wx), ref("bw_uh", bw_uh), ref("bw_b", bw_b),
          ref("q_w", q_w),     ref("q_b", q_b)};
}

std::vector<TensorRef> CellParams::tensors() {
  std::vector<TensorRef> out;
  for (std::size_t i = 0; i < ctl_w.size(); ++i) {
    out.push_back(ref("ctl_w." + std::to_string(i + 1), ctl_w[i]));
    out.push_back(ref("ctl_b." + std::to_string(i + 1), ctl_b[i]));
  }
  for (TensorRef r : {ref("ctl_u", ctl_u), ref("k_w", k_w), ref("m_w", m_w), ref("i_w", i_w),
                      ref("read_u", read_u), ref("read_null", read_null), ref("wr_w", wr_w),
                      ref("wr_b", wr_b), ref("gate_u", gate_u), ref("gate_b", gate_b),
                      ref("m0", m0), ref("out1_w", out1_w), ref("out1_b", out1_b),
                      ref("out2_w", out2_w), ref("out2_b", out2_b)}) {
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TensorRef> BranchParams::tensors() {
  std::vector<TensorRef> out;
  for (TensorRef& r : encoder.tensors()) {
    r.name = "encoder." + r.name;
    out.push_back(std::move(r));
  }
  for (TensorRef& r : cell.tensors()) {
    r.name = "cell." + r.name;
    out.push_back(std::move(r));
  }
  return out;
}

BranchParams init_branch(const HyperParams& hp, std::uint64_t seed) {
  validate(hp);
  Rng rng(mix64(seed));
  const int d = hp.d;
  BranchParams b;
  EncoderParams& e = b.encoder;
  e.in_w = uniform(d, hp.word_dim, rng);
  e.in_b = VectorXd::Zero(d);
  e.fw_wx = uniform(3 * d, d, rng);
  e.fw_uh = uniform(3 * d, d, rng);
  e.fw_b = VectorXd::Zero(3 * d);
  e.bw_wx = uniform(3 * d, d, rng);
  e.bw_uh = uniform(3 * d, d, rng);
  e.bw_b = VectorXd::Zero(3 * d);
  e.q_w = uniform(d, 2 * d, rng);
  e.q_b = VectorXd::Zero(d);

  CellParams& c = b.cell;
  for (int i = 0; i < hp.p; ++i) {
    c.ctl_w.push_back(uniform(d, d, rng));
    c.ctl_b.push_back(VectorXd::Zero(d));
  }
  c.ctl_u = uniform(d, rng);
  c.k_w = uniform(d, hp.knowledge_dim, rng);
  c.m_w = uniform(d, d, rng);
  c.i_w = uniform(d, 2 * d, rng);
  c.read_u = uniform(d, rng);
  c.read_null = uniform(d, rng);
  c.wr_w = uniform(d, 2 * d, rng);
  c.wr_b = VectorXd::Zero(d);
  c.gate_u = uniform(d, rng);
  c.gate_b = VectorXd::Zero(1);
  c.m0 = uniform(d, rng);
  c.out1_w = uniform(d, 2 * d, rng);
  c.out1_b = VectorXd::Zero(d);
  c.out2_w = uniform(hp.answer_count, d, rng);
  c.out2_b = VectorXd::Zero(hp.answer_count);
  return b;
}

BranchParams zeros_like(const BranchParams& params) {
  BranchParams z = params;
  set_zero(z);
  return z;
}

void set_zero(BranchParams& params) {
  for (TensorRef& r : params.tensors()) std::fill(r.data, r.data + r.size(), 0.0);
}

QuestionEncoding encode_question(const MatrixXd& tokens, const EncoderParams& params) {
  BranchTrace t;
  encode_into(tokens, params, t);
  return std::move(t.enc);
}

QuestionEncoding encode_question(const std::vector<std::string>& tokens,
                                 const EmbeddingTable& table, const EncoderParams& params) {
  return encode_question(embed_items(tokens, table), params);
}

AttentionResult control_step(const QuestionEncoding& enc, const CellParams& params, int step) {
  if (step < 1 || step > static_cast<int>(params.ctl_w.size())) {
    throw Error(ErrorKind::kContract, "control_step: step out of range");
  }
  VectorXd cq = params.ctl_w[step - 1] * enc.q + params.ctl_b[step - 1];
  AttentionResult out;
  out.attention = softmax(enc.cw * params.ctl_u.cwiseProduct(cq));
  out.value = enc.cw.transpose() * out.attention;
  return out;
}

AttentionResult read_step(const MacState& state, const VectorXd& control,
                          const MatrixXd& projected, const CellParams& params) {
  AttentionResult out;
  if (projected.rows() == 0) {
    out.value = params.read_null;
    return out;
  }
  const Eigen::Index d = params.m_w.rows();
  VectorXd mm = params.m_w * state.m;
  MatrixXd joined(projected.rows(), 2 * d);
  joined.leftCols(d) = projected.array().rowwise() * mm.transpose().array();
  joined.rightCols(d) = projected;
  VectorXd scores = (joined * params.i_w.transpose()) * params.read_u.cwiseProduct(control);
  out.attention = softmax(scores);
  out.value = projected.transpose() * out.attention;
  return out;
}

VectorXd write_step(const MacState& state, const VectorXd& read, const VectorXd& control,
                    const CellParams& params) {
  VectorXd joined(read.size() + state.m.size());
  joined << read, state.m;
  VectorXd cand = params.wr_w * joined + params.wr_b;
  double g = sigmoid(params.gate_u.dot(control) + params.gate_b[0]);
  return g * state.m + (1.0 - g) * cand;
}

void forward_branch(const MatrixXd& tokens, const MatrixXd& knowledge,
                    const EncoderParams& encoder, const CellParams& cell,
                    const HyperParams& hp, BranchTrace& trace) {
  encode_into(tokens, encoder, trace);
  cell_forward(knowledge, cell, hp, trace);
}

Eigen::VectorXd run_branch(const QuestionEncoding& enc, const MatrixXd& knowledge,
                           const CellParams& params, const HyperParams& hp) {
  BranchTrace t;
  t.enc = enc;
  cell_forward(knowledge, params, hp, t);
  return t.logits;
}

void backward_branch(const BranchTrace& t, const VectorXd& dlogits,
                     const EncoderParams& enc_p, const CellParams& p, const HyperParams& hp,
                     EncoderParams& eg, CellParams& g) {
  const int d = hp.d;
  const Eigen::Index S = t.enc.cw.rows();

  // Output classifier.
  g.out2_b += dlogits;
  g.out2_w.noalias() += dlogits * t.z1.transpose();
  VectorXd dz1 = p.out2_w.transpose() * dlogits;
  VectorXd dh1 = dz1.cwiseProduct(
      t.h1.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); }));
  VectorXd mq(2 * d);
  mq << t.m, t.enc.q;
  g.out1_w.noalias() += dh1 * mq.transpose();
  g.out1_b += dh1;
  VectorXd dmq = p.out1_w.transpose() * dh1;
  VectorXd dm = dmq.head(d);
  VectorXd dq = dmq.tail(d);

  MatrixXd dcw = MatrixXd::Zero(S, d);
  MatrixXd dprojected = MatrixXd::Zero(t.projected.rows(), d);

  for (int i = hp.p; i >= 1; --i) {
    const BranchTrace::Step& st = t.steps[static_cast<std::size_t>(i - 1)];

    // Write unit.
    VectorXd dm_prev = st.g * dm;
    VectorXd dm_cand = (1.0 - st.g) * dm;
    double dgate = dm.dot(st.m_prev - st.m_cand) * st.g * (1.0 - st.g);
    g.gate_u += dgate * st.c;
    g.gate_b[0] += dgate;
    VectorXd dc = dgate * p.gate_u;
    VectorXd joined(2 * d);
    joined << st.r, st.m_prev;
    g.wr_w.noalias() += dm_cand * joined.transpose();
    g.wr_b += dm_cand;
    VectorXd djoined = p.wr_w.transpose() * dm_cand;
    VectorXd dr = djoined.head(d);
    dm_prev += djoined.tail(d);

    // Read unit.
    if (t.projected.rows() == 0) {
      g.read_null += dr;
    } else {
      const VectorXd& a = st.read_attn;
      dprojected.noalias() += a * dr.transpose();
      VectorXd da = t.projected * dr;
      VectorXd dscore = softmax_backward(a, da);
      // x_e = [mm * kp_e ; kp_e]; xs = sum_e dscore_e x_e
      VectorXd kp_sum = t.projected.transpose() * dscore;
      VectorXd xs(2 * d);
      xs << st.mm.cwiseProduct(kp_sum), kp_sum;
      VectorXd dv = p.i_w * xs;
      g.i_w.noalias() += st.v * xs.transpose();
      g.read_u += dv.cwiseProduct(st.c);
      dc += dv.cwiseProduct(p.read_u);
      // d x_e = dscore_e * wv
      VectorXd wv_i = st.wv.head(d);
      VectorXd wv_k = st.wv.tail(d);
      dprojected.noalias() += dscore * (wv_i.cwiseProduct(st.mm) + wv_k).transpose();
      VectorXd dmm = wv_i.cwiseProduct(kp_sum);
      g.m_w.noalias() += dmm * st.m_prev.transpose();
      dm_prev.noalias() += p.m_w.transpose() * dmm;
    }

    // Control unit.
    const VectorXd& a = st.control_attn;
    dcw.noalias() += a * dc.transpose();
    VectorXd da = t.enc.cw * dc;
    VectorXd dlogit = softmax_backward(a, da);
    VectorXd w = p.ctl_u.cwiseProduct(st.cq);
    VectorXd dw = t.enc.cw.transpose() * dlogit;
    dcw.noalias() += dlogit * w.transpose();
    g.ctl_u += dw.cwiseProduct(st.cq);
    VectorXd dcq = dw.cwiseProduct(p.ctl_u);
    g.ctl_w[i - 1].noalias() += dcq * t.enc.q.transpose();
    g.ctl_b[i - 1] += dcq;
    dq.noalias() += p.ctl_w[i - 1].transpose() * dcq;

    dm = std::move(dm_prev);
  }
  g.m0 += dm;
  if (t.projected.rows() > 0) g.k_w.noalias() += dprojected.transpose() * t.knowledge;

  // Question summary and encoder.
  VectorXd ends(2 * d);
  ends << t.fw.h[S - 1], t.bw.h[0];
  eg.q_w.noalias() += dq * ends.transpose();
  eg.q_b += dq;
  VectorXd dends = enc_p.q_w.transpose() * dq;

  std::vector<VectorXd> dh_fw(S), dh_bw(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    dh_fw[s] = dcw.row(s).transpose();
    dh_bw[s] = dh_fw[s];
  }
  dh_fw[S - 1] += dends.head(d);
  dh_bw[0] += dends.tail(d);

  MatrixXd dx = MatrixXd::Zero(S, d);
  gru_backward(t.x, t.fw, enc_p.fw_wx, enc_p.fw_uh, false, dh_fw, eg.fw_wx, eg.fw_uh, eg.fw_b, dx);
  gru_backward(t.x, t.bw, enc_p.bw_wx, enc_p.bw_uh, true, dh_bw, eg.bw_wx, eg.bw_uh, eg.bw_b, dx);
  eg.in_w.noalias() += dx.transpose() * t.tokens;
  eg.in_b += dx.colwise().sum().transpose();
}

}  // namespace kbvqa
