// Copyright 2026 The TFIQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TFIQA_OPTIMIZER_HPP_
#define TFIQA_OPTIMIZER_HPP_

#include <map>
#include <string>

#include "tfiqa/tensor.hpp"

namespace tfiqa {

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) and classic SGD with momentum.
// Per-parameter state is keyed by name; constant learning rate.
class Optimizer {
 public:
  enum class Kind { kAdam, kSgdMomentum };

  Optimizer(Kind kind, double learning_rate, double momentum = 0.9)
      : kind_(kind), lr_(learning_rate), momentum_(momentum) {}

  void Step(const std::string& name, Tensor& param, const Tensor& grad);

 private:
  struct Slot {
    Tensor m;  // Adam first moment / SGD velocity
    Tensor v;  // Adam second moment
    int64_t t = 0;
  };

  Kind kind_;
  double lr_;
  double momentum_;
  std::map<std::string, Slot> slots_;
};

}  // namespace tfiqa

#endif  // TFIQA_OPTIMIZER_HPP_
