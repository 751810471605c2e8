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

#ifndef TFIQA_LOSSES_HPP_
#define TFIQA_LOSSES_HPP_

#include <vector>

#include "tfiqa/autodiff.hpp"
#include "tfiqa/nr_head.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

enum class LossBranch { kFr, kNr, kJoint };

struct LossValue {
  double value = 0.0;
  LossBranch branch = LossBranch::kFr;
};

// Mean squared error over a batch of FR score predictions.
LossValue MseLoss(const std::vector<double>& pred, const std::vector<double>& label_fr);

// Earth mover's distance between five-level distributions:
//   per sample ((1/5) * sum_k |CDF_p(k) - CDF_q(k)|^r)^(1/r), batch-averaged.
// Rows must sum to 1 within 1e-4.
LossValue EmdLoss(const std::vector<QualityDistribution>& p,
                  const std::vector<QualityDistribution>& label_nr, double r = 2.0);

// L_all = L_fr + L_nr, unweighted. Branch tags are checked.
LossValue JointLoss(const LossValue& l_fr, const LossValue& l_nr);

// ---- Tape builders (r = 2).

// pred/labels: [B, 1].
ad::Var BuildMseLoss(ad::Tape& tape, ad::Var pred, ad::Var labels);

// probs/labels: [B, 5]; labels are validated to be distributions.
ad::Var BuildEmdLoss(ad::Tape& tape, ad::Var probs, ad::Var labels);

}  // namespace tfiqa

#endif  // TFIQA_LOSSES_HPP_
