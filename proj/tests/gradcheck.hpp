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

// Central finite-difference check of accumulate_gradients.
#ifndef KBVQA_TESTS_GRADCHECK_HPP_
#define KBVQA_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "fusion.hpp"

namespace kbvqa::gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::string worst;  // tensor name of the worst component
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|), with components whose magnitudes
// both fall below `floor` compared on the absolute scale of `floor`.
inline Result check(FusionModel model, const Example& example, double step = 1e-5,
                    double floor = 1e-6) {
  FusionModel grads = zero_gradients(model);
  accumulate_gradients(model, example, grads);
  auto loss_at = [&] {
    return loss(forward(model, example), example.answer);
  };
  Result out;
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    auto params = model.branches[b].tensors();
    auto analytic = grads.branches[b].tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (Eigen::Index k = 0; k < params[t].size(); ++k) {
        double& x = params[t].data[k];
        const double saved = x;
        x = saved + step;
        const double up = loss_at();
        x = saved - step;
        const double down = loss_at();
        x = saved;
        const double numeric = (up - down) / (2 * step);
        const double a = analytic[t].data[k];
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        const double rel = std::abs(a - numeric) / denom;
        ++out.checked;
        if (rel > out.max_rel_error) {
          out.max_rel_error = rel;
          std::ostringstream where;
          where << "branch " << b << " " << params[t].name << "[" << k << "] analytic " << a
                << " numeric " << numeric;
          out.worst = where.str();
        }
      }
    }
  }
  return out;
}

}  // namespace kbvqa::gradcheck

#endif  // KBVQA_TESTS_GRADCHECK_HPP_
