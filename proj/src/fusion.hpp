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

#ifndef KBVQA_FUSION_HPP_
#define KBVQA_FUSION_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "knowledge.hpp"
#include "reasoner.hpp"

namespace kbvqa {

// Late fusion of independent reasoning branches, one per knowledge stream
// kind. With shared_encoder set, every branch reads the question through
// branches[0].encoder and the other branches' encoders stay empty.
struct FusionModel {
  HyperParams hp;
  std::vector<StreamKind> kinds;
  std::vector<BranchParams> branches;
  std::vector<std::string> answer_vocab;
  bool shared_encoder = false;

  std::size_t answer_index(const std::string& answer) const;  // npos if absent
  const EncoderParams& encoder_for(std::size_t branch) const;
  std::size_t parameter_count() const;
};

// Throws kConfig on an empty kind list, repeated kinds, or an answer
// vocabulary that is empty or has duplicates.
FusionModel init_model(const std::vector<StreamKind>& kinds,
                       const std::vector<std::string>& answer_vocab, HyperParams hp,
                       bool shared_encoder = false);

bool models_equal(const FusionModel& a, const FusionModel& b);

// sigma(sum of logits), element-wise. Throws kShape on mismatched lengths or
// an empty list.
Eigen::VectorXd fuse(const std::vector<Eigen::VectorXd>& logits);
// Lowest index among the maxima.
std::size_t predict(const Eigen::VectorXd& probabilities);
// Mean binary cross-entropy over answers against a one-hot target.
double loss(const Eigen::VectorXd& probabilities, std::size_t target);

struct Example {
  std::string question_id;
  const ImageKnowledge* knowledge = nullptr;  // not owned
  Eigen::MatrixXd tokens;                     // embedded question, S x word_dim
  std::size_t answer = 0;
};

// Probabilities for one example; branches whose stream is missing contribute
// zero logits.
Eigen::VectorXd forward(const FusionModel& model, const Example& example);

// Loss of one example, accumulating d(loss)/d(params) into `grads`.
double accumulate_gradients(const FusionModel& model, const Example& example,
                            FusionModel& grads);
FusionModel zero_gradients(const FusionModel& model);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 1;
  bool adaptive = true;
  // Scale the learning rate linearly from 1 down to 1/T over the T updates.
  bool linear_decay = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const TrainConfig& config);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::size_t updates = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Mini-batch training with per-epoch shuffling from config.seed. Throws
// kNonFinite naming the epoch and batch when a loss or gradient is not finite.
TrainResult train(FusionModel& model, const std::vector<Example>& data,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

// Checkpoint: hyperparameters, answer vocabulary, config echo and every branch
// tensor with its shape. Round-trips exactly.
std::string serialize_checkpoint(const FusionModel& model, const nlohmann::json& config_echo);
FusionModel parse_checkpoint(std::string_view text, nlohmann::json* config_echo = nullptr);

}  // namespace kbvqa

#endif  // KBVQA_FUSION_HPP_
