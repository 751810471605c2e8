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

#include "tfiqa/nr_head.hpp"

#include <cmath>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

void QualityDistribution::Validate(double tol) const {
  if (probs.size() != kNumQualityLevels) {
    throw ValidationError("quality distribution must have exactly 5 entries");
  }
  double sum = 0.0;
  for (int64_t i = 0; i < probs.size(); ++i) {
    const double v = probs[i];
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("quality distribution entries must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol) {
    throw ValidationError("quality distribution must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

NrHeadState NrHeadState::Init(int input_dim, int hidden_dim, double dropout_rate, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("nr head: dims must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("nr head: dropout_rate must be in [0, 1)");
  }
  NrHeadState s;
  s.input_dim = input_dim;
  s.hidden_dim = hidden_dim;
  s.dropout_rate = dropout_rate;
  auto trunc = [&rng](std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.TruncatedNormal(0.02);
    return t;
  };
  s.w1 = trunc({input_dim, hidden_dim});
  s.b1 = Tensor({hidden_dim});
  s.w2 = trunc({hidden_dim, kNumQualityLevels});
  s.b2 = Tensor({kNumQualityLevels});
  return s;
}

namespace {

template <typename State, typename Fn>
void WalkHead(State& s, const Fn& fn) {
  fn("head/linear1.weight", s.w1);
  fn("head/linear1.bias", s.b1);
  fn("head/linear2.weight", s.w2);
  fn("head/linear2.bias", s.b2);
}

}  // namespace

void NrHeadState::ForEachParam(const std::function<void(const std::string&, Tensor&)>& fn) {
  WalkHead(*this, fn);
}

void NrHeadState::ForEachParam(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  WalkHead(*this, fn);
}

NrHeadVars RegisterNrHead(ad::Tape& tape, const NrHeadState& state, bool trainable,
                          std::vector<std::pair<std::string, ad::Var>>* bindings) {
  NrHeadVars vars;
  ad::Var* slots[] = {&vars.w1, &vars.b1, &vars.w2, &vars.b2};
  size_t next = 0;
  state.ForEachParam([&](const std::string& name, const Tensor& t) {
    ad::Var v = trainable ? tape.Param(t) : tape.Constant(t);
    *slots[next++] = v;
    if (trainable && bindings) bindings->emplace_back(name, v);
  });
  return vars;
}

ad::Var BuildClassify(ad::Tape& tape, ad::Var quality_tokens, const NrHeadVars& vars,
                      double dropout_rate, bool training, Rng* dropout_rng) {
  if (!tape.Value(quality_tokens).AllFinite()) {
    throw NumericError("nr head received non-finite quality tokens");
  }
  ad::Var hidden = tape.AddRowVec(tape.MatMul(quality_tokens, vars.w1), vars.b1);
  if (training && dropout_rate > 0.0) {
    if (dropout_rng == nullptr) throw ConfigError("nr head: training with dropout requires an RNG");
    hidden = tape.Dropout(hidden, dropout_rate, *dropout_rng);
  }
  hidden = tape.Relu(hidden);
  ad::Var logits = tape.AddRowVec(tape.MatMul(hidden, vars.w2), vars.b2);
  return tape.SoftmaxRows(logits);
}

QualityDistribution Classify(const Tensor& quality_token, const NrHeadState& state, bool training,
                             Rng* dropout_rng) {
  if (quality_token.size() != state.input_dim) {
    throw ValidationError("nr head: quality token length does not match input_dim");
  }
  ad::Tape tape;
  NrHeadVars vars = RegisterNrHead(tape, state, /*trainable=*/false);
  ad::Var x = tape.Constant(Tensor({1, state.input_dim}, quality_token.vec()));
  ad::Var probs = BuildClassify(tape, x, vars, state.dropout_rate, training, dropout_rng);
  QualityDistribution dist;
  dist.probs = Tensor({kNumQualityLevels}, tape.Value(probs).vec());
  return dist;
}

double NrScore(const QualityDistribution& dist) {
  dist.Validate();
  double score = 0.0;
  for (int k = 0; k < kNumQualityLevels; ++k) {
    score += static_cast<double>(k + 1) * dist.probs[k];
  }
  return score;
}

}  // namespace tfiqa
