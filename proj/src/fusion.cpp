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

#include "fusion.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "common.hpp"

namespace kbvqa {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::size_t FusionModel::answer_index(const std::string& answer) const {
  for (std::size_t i = 0; i < answer_vocab.size(); ++i) {
    if (answer_vocab[i] == answer) return i;
  }
  return std::string::npos;
}

const EncoderParams& FusionModel::encoder_for(std::size_t branch) const {
  return shared_encoder ? branches.front().encoder : branches[branch].encoder;
}

std::size_t FusionModel::parameter_count() const {
  std::size_t n = 0;
  for (const BranchParams& b : branches) {
    for (const TensorRef& r : const_cast<BranchParams&>(b).tensors()) {
      n += static_cast<std::size_t>(r.size());
    }
  }
  return n;
}

FusionModel init_model(const std::vector<StreamKind>& kinds,
                       const std::vector<std::string>& answer_vocab, HyperParams hp,
                       bool shared_encoder) {
  if (kinds.empty()) throw Error(ErrorKind::kConfig, "model needs at least one branch");
  if (std::set<StreamKind>(kinds.begin(), kinds.end()).size() != kinds.size()) {
    throw Error(ErrorKind::kConfig, "model branches must have distinct stream kinds");
  }
  if (answer_vocab.empty()) throw Error(ErrorKind::kConfig, "answer vocabulary is empty");
  if (std::set<std::string>(answer_vocab.begin(), answer_vocab.end()).size() !=
      answer_vocab.size()) {
    throw Error(ErrorKind::kConfig, "answer vocabulary has duplicates");
  }
  hp.answer_count = static_cast<int>(answer_vocab.size());
  validate(hp);
  FusionModel model;
  model.hp = hp;
  model.kinds = kinds;
  model.answer_vocab = answer_vocab;
  model.shared_encoder = shared_encoder;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    model.branches.push_back(init_branch(hp, mix64(hp.seed * 1000003ULL + i)));
    if (shared_encoder && i > 0) model.branches.back().encoder = EncoderParams{};
  }
  return model;
}

bool models_equal(const FusionModel& a, const FusionModel& b) {
  if (!(a.hp == b.hp) || a.kinds != b.kinds || a.answer_vocab != b.answer_vocab ||
      a.shared_encoder != b.shared_encoder || a.branches.size() != b.branches.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.branches.size(); ++i) {
    auto ta = const_cast<BranchParams&>(a.branches[i]).tensors();
    auto tb = const_cast<BranchParams&>(b.branches[i]).tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k) {
      if (ta[k].rows != tb[k].rows || ta[k].cols != tb[k].cols) return false;
      if (!std::equal(ta[k].data, ta[k].data + ta[k].size(), tb[k].data)) return false;
    }
  }
  return true;
}

VectorXd fuse(const std::vector<VectorXd>& logits) {
  if (logits.empty()) throw Error(ErrorKind::kShape, "fuse: no logits");
  VectorXd sum = VectorXd::Zero(logits.front().size());
  for (const VectorXd& l : logits) {
    if (l.size() != sum.size()) {
      throw Error(ErrorKind::kShape, "fuse: logit vectors of lengths " +
                                         std::to_string(sum.size()) + " and " +
                                         std::to_string(l.size()));
    }
    sum += l;
  }
  return sum.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

std::size_t predict(const VectorXd& probabilities) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[static_cast<Eigen::Index>(best)]) {
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

double loss(const VectorXd& probabilities, std::size_t target) {
  double total = 0.0;
  for (Eigen::Index a = 0; a < probabilities.size(); ++a) {
    total -= static_cast<std::size_t>(a) == target ? std::log(probabilities[a])
                                                   : std::log1p(-probabilities[a]);
  }
  return total / static_cast<double>(probabilities.size());
}

namespace {

const MatrixXd& knowledge_for(const FusionModel& model, std::size_t branch,
                              const Example& ex, bool& present) {
  static const MatrixXd kEmpty;
  const KnowledgeStream* s =
      ex.knowledge != nullptr ? ex.knowledge->find(model.kinds[branch]) : nullptr;
  present = s != nullptr;
  return present ? s->vectors : kEmpty;
}

// Forward through all present branches; returns summed logits.
VectorXd forward_traces(const FusionModel& model, const Example& ex,
                        std::vector<BranchTrace>& traces, std::vector<bool>& present) {
  traces.resize(model.branches.size());
  present.assign(model.branches.size(), false);
  VectorXd sum = VectorXd::Zero(model.hp.answer_count);
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    bool has = false;
    const MatrixXd& k = knowledge_for(model, b, ex, has);
    if (!has) continue;
    present[b] = true;
    forward_branch(ex.tokens, k, model.encoder_for(b), model.branches[b].cell, model.hp,
                   traces[b]);
    sum += traces[b].logits;
  }
  return sum;
}

VectorXd sigmoid(const VectorXd& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double loss_from_logits(const VectorXd& logits, std::size_t target) {
  double total = 0.0;
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    total += static_cast<std::size_t>(a) == target ? softplus(-logits[a]) : softplus(logits[a]);
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace

VectorXd forward(const FusionModel& model, const Example& example) {
  std::vector<BranchTrace> traces;
  std::vector<bool> present;
  return sigmoid(forward_traces(model, example, traces, present));
}

FusionModel zero_gradients(const FusionModel& model) {
  FusionModel g = model;
  for (BranchParams& b : g.branches) set_zero(b);
  return g;
}

double accumulate_gradients(const FusionModel& model, const Example& example,
                            FusionModel& grads) {
  thread_local std::vector<BranchTrace> traces;
  std::vector<bool> present;
  const VectorXd logits = forward_traces(model, example, traces, present);
  VectorXd probs = sigmoid(logits);
  VectorXd target = VectorXd::Zero(probs.size());
  target[static_cast<Eigen::Index>(example.answer)] = 1.0;
  VectorXd dlogits = (probs - target) / static_cast<double>(probs.size());
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    if (!present[b]) continue;
    EncoderParams& eg =
        model.shared_encoder ? grads.branches.front().encoder : grads.branches[b].encoder;
    backward_branch(traces[b], dlogits, model.encoder_for(b), model.branches[b].cell,
                    model.hp, eg, grads.branches[b].cell);
  }
  return loss_from_logits(logits, example.answer);
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || c.batch_size < 1 || c.epochs < 0) {
    throw Error(ErrorKind::kConfig,
                "train config: learning_rate >= 0, batch_size >= 1, epochs >= 0 required");
  }
  if (c.adaptive && (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1) ||
                     !(c.epsilon > 0))) {
    throw Error(ErrorKind::kConfig, "train config: invalid adaptive-step constants");
  }
}

TrainResult train(FusionModel& model, const std::vector<Example>& data,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  TrainResult result;
  if (data.empty() || config.epochs == 0) return result;
  FusionModel grads = zero_gradients(model);
  FusionModel moment1 = zero_gradients(model);
  FusionModel moment2 = zero_gradients(model);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(config.seed ^ 0x5eedULL));
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const double total_updates =
      static_cast<double>(config.epochs) * static_cast<double>((data.size() + batch - 1) / batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (BranchParams& b : grads.branches) set_zero(b);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        batch_loss += accumulate_gradients(model, data[order[k]], grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      auto fail = [&](const char* what) {
        return Error(ErrorKind::kNonFinite, std::string(what) + " at epoch " +
                                                std::to_string(epoch + 1) + ", batch " +
                                                std::to_string(batch_index + 1));
      };
      if (!std::isfinite(batch_loss)) throw fail("non-finite loss");
      epoch_loss += batch_loss;
      ++result.updates;

      const double t = static_cast<double>(result.updates);
      const double lr = config.linear_decay
                            ? config.learning_rate * (1.0 - (t - 1.0) / total_updates)
                            : config.learning_rate;
      const double bias1 = 1.0 - std::pow(config.beta1, t);
      const double bias2 = 1.0 - std::pow(config.beta2, t);
      for (std::size_t b = 0; b < model.branches.size(); ++b) {
        auto params = model.branches[b].tensors();
        auto g = grads.branches[b].tensors();
        auto m1 = moment1.branches[b].tensors();
        auto m2 = moment2.branches[b].tensors();
        for (std::size_t k = 0; k < params.size(); ++k) {
          for (Eigen::Index i = 0; i < params[k].size(); ++i) {
            const double gi = g[k].data[i] * scale;
            if (!std::isfinite(gi)) throw fail("non-finite gradient");
            if (config.adaptive) {
              double& a = m1[k].data[i];
              double& v = m2[k].data[i];
              a = config.beta1 * a + (1.0 - config.beta1) * gi;
              v = config.beta2 * v + (1.0 - config.beta2) * gi * gi;
              params[k].data[i] -= lr * (a / bias1) /
                                   (std::sqrt(v / bias2) + config.epsilon);
            } else {
              params[k].data[i] -= lr * gi;
            }
          }
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch + 1, result.epoch_loss.back());
  }
  return result;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed},
          {"adaptive", c.adaptive},           {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"linear_decay", c.linear_decay}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adaptive = j.value("adaptive", c.adaptive);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.linear_decay = j.value("linear_decay", c.linear_decay);
  return c;
}

json hyperparams_to_json(const HyperParams& hp) {
  return {{"d", hp.d},
          {"p", hp.p},
          {"answer_count", hp.answer_count},
          {"word_dim", hp.word_dim},
          {"knowledge_dim", hp.knowledge_dim},
          {"seed", hp.seed}};
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  hp.d = j.value("d", hp.d);
  hp.p = j.value("p", hp.p);
  hp.answer_count = j.value("answer_count", hp.answer_count);
  hp.word_dim = j.value("word_dim", hp.word_dim);
  hp.knowledge_dim = j.value("knowledge_dim", hp.knowledge_dim);
  hp.seed = j.value("seed", hp.seed);
  return hp;
}

std::string serialize_checkpoint(const FusionModel& model, const json& config_echo) {
  json branches = json::array();
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    json tensors = json::array();
    for (const TensorRef& r : const_cast<BranchParams&>(model.branches[b]).tensors()) {
      tensors.push_back({{"name", r.name},
                         {"rows", r.rows},
                         {"cols", r.cols},
                         {"values", std::vector<double>(r.data, r.data + r.size())}});
    }
    branches.push_back({{"kind", stream_kind_name(model.kinds[b])}, {"tensors", tensors}});
  }
  json doc = {{"format", "kbvqa-checkpoint"},
              {"version", 1},
              {"hyperparams", hyperparams_to_json(model.hp)},
              {"shared_encoder", model.shared_encoder},
              {"answers", model.answer_vocab},
              {"config", config_echo},
              {"branches", branches}};
  return doc.dump() + "\n";
}

FusionModel parse_checkpoint(std::string_view text, json* config_echo) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kCorrupt, std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format") != "kbvqa-checkpoint" || doc.at("version") != 1) {
      throw Error(ErrorKind::kCorrupt, "checkpoint: unknown format");
    }
    std::vector<StreamKind> kinds;
    for (const json& b : doc.at("branches")) kinds.push_back(parse_stream_kind(b.at("kind").get<std::string>()));
    FusionModel model =
        init_model(kinds, doc.at("answers").get<std::vector<std::string>>(),
                   hyperparams_from_json(doc.at("hyperparams")), doc.at("shared_encoder").get<bool>());
    if (model.hp.answer_count != doc.at("hyperparams").at("answer_count").get<int>()) {
      throw Error(ErrorKind::kCorrupt, "checkpoint: answer_count disagrees with answers");
    }
    for (std::size_t b = 0; b < kinds.size(); ++b) {
      const json& tensors = doc.at("branches")[b].at("tensors");
      auto refs = model.branches[b].tensors();
      if (tensors.size() != refs.size()) {
        throw Error(ErrorKind::kCorrupt, "checkpoint: branch " + std::to_string(b) +
                                             " has the wrong number of tensors");
      }
      for (std::size_t k = 0; k < refs.size(); ++k) {
        const json& t = tensors[k];
        if (t.at("name") != refs[k].name || t.at("rows") != refs[k].rows ||
            t.at("cols") != refs[k].cols) {
          throw Error(ErrorKind::kCorrupt, "checkpoint: tensor '" + refs[k].name +
                                               "' missing or misshapen");
        }
        const json& values = t.at("values");
        if (values.size() != static_cast<std::size_t>(refs[k].size())) {
          throw Error(ErrorKind::kCorrupt, "checkpoint: tensor '" + refs[k].name +
                                               "' has the wrong number of values");
        }
        for (std::size_t i = 0; i < values.size(); ++i) refs[k].data[i] = values[i].get<double>();
      }
    }
    if (config_echo != nullptr) *config_echo = doc.value("config", json::object());
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorrupt, std::string("checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorrupt) throw;
    throw Error(ErrorKind::kCorrupt, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace kbvqa
