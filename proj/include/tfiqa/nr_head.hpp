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

#ifndef TFIQA_NR_HEAD_HPP_
#define TFIQA_NR_HEAD_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tfiqa/autodiff.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

class Rng;

inline constexpr int kNumQualityLevels = 5;

// Probability vector over the five quality levels (level values 1..5).
struct QualityDistribution {
  Tensor probs;  // [5]

  // Entries >= 0, sum within `tol` of 1.
  void Validate(double tol = 1e-6) const;
};

// Two-layer classification head over the encoded quality token:
//   softmax(linear2(relu(dropout(linear1(x)))))
struct NrHeadState {
  int input_dim = 32;
  int hidden_dim = 64;
  double dropout_rate = 0.1;
  Tensor w1, b1;  // [D, H], [H]
  Tensor w2, b2;  // [H, 5], [5]

  static NrHeadState Init(int input_dim, int hidden_dim, double dropout_rate, Rng& rng);

  void ForEachParam(const std::function<void(const std::string&, Tensor&)>& fn);
  void ForEachParam(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

struct NrHeadVars {
  ad::Var w1, b1, w2, b2;
};

NrHeadVars RegisterNrHead(ad::Tape& tape, const NrHeadState& state, bool trainable,
                          std::vector<std::pair<std::string, ad::Var>>* bindings = nullptr);

// quality_tokens: [B, D] batch of encoded quality tokens -> [B, 5] probbs.
ad::Var BuildClassify(ad::Tape& tape, ad::Var quality_tokens, const NrHeadVars& vars,
                      double dropout_rate, bool training, Rng* dropout_rng);

// Single-token wrapper; deterministic with training=false.
QualityDistribution Classify(const Tensor& quality_token, const NrHeadState& state,
                             bool training = false, Rng* dropout_rng = nullptr);

// Mean quality level: sum_k k * probs[k-1], in [1, 5].
double NrScore(const QualityDistribution& dist);

}  // namespace tfiqa

#endif  // TFIQA_NR_HEAD_HPP_
