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

#include "tfiqa/losses.hpp"

#include <cmath>

#include "tfiqa/common.hpp"

namespace tfiqa {

LossValue MseLoss(const std::vector<double>& pred, const std::vector<double>& label_fr) {
  if (pred.empty()) throw ValidationError("mse_loss: empty batch");
  if (pred.size() != label_fr.size()) throw ValidationError("mse_loss: batch length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(label_fr[i])) {
      throw NumericError("mse_loss: non-finite input");
    }
    const double d = pred[i] - label_fr[i];
    acc += d * d;
  }
  return LossValue{acc / static_cast<double>(pred.size()), LossBranch::kFr};
}

LossValue EmdLoss(const std::vector<QualityDistribution>& p,
                  const std::vector<QualityDistribution>& label_nr, double r) {
  if (p.empty()) throw ValidationError("emd_loss: empty batch");
  if (p.size() != label_nr.size()) throw ValidationError("emd_loss: batch length mismatch");
  if (r < 1.0) throw ValidationError("emd_loss: exponent must be >= 1");
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    p[i].Validate(1e-4);
    label_nr[i].Validate(1e-4);
    double cdf_p = 0.0;
    double cdf_q = 0.0;
    double sum = 0.0;
    for (int k = 0; k < kNumQualityLevels; ++k) {
      cdf_p += p[i].probs[k];
      cdf_q += label_nr[i].probs[k];
      sum += std::pow(std::fabs(cdf_p - cdf_q), r);
    }
    acc += std::pow(sum / kNumQualityLevels, 1.0 / r);
  }
  return LossValue{acc / static_cast<double>(p.size()), LossBranch::kNr};
}

LossValue JointLoss(const LossValue& l_fr, const LossValue& l_nr) {
  if (l_fr.branch != LossBranch::kFr || l_nr.branch != LossBranch::kNr) {
    throw ValidationError("joint_loss: operands must be an (fr, nr) loss pair");
  }
  return LossValue{l_fr.value + l_nr.value, LossBranch::kJoint};
}

ad::Var BuildMseLoss(ad::Tape& tape, ad::Var pred, ad::Var labels) {
  const Tensor& tp = tape.Value(pred);
  const Tensor& tl = tape.Value(labels);
  if (tp.size() == 0) throw ValidationError("mse_loss: empty batch");
  if (!tp.SameShape(tl)) throw ValidationError("mse_loss: batch shape mismatch");
  ad::Var diff = tape.Sub(pred, labels);
  return tape.MeanAll(tape.Mul(diff, diff));
}

ad::Var BuildEmdLoss(ad::Tape& tape, ad::Var probs, ad::Var labels) {
  const Tensor& tp = tape.Value(probs);
  const Tensor& tl = tape.Value(labels);
  if (tp.rows() == 0) throw ValidationError("emd_loss: empty batch");
  if (!tp.SameShape(tl) || tp.cols() != kNumQualityLevels) {
    throw ValidationError("emd_loss: batches must be [B, 5] with matching shapes");
  }
  for (const Tensor* t : {&tp, &tl}) {
    for (int64_t i = 0; i < t->rows(); ++i) {
      double sum = 0.0;
      for (int64_t k = 0; k < kNumQualityLevels; ++k) sum += t->At(i, k);
      if (std::fabs(sum - 1.0) > 1e-4) {
        throw ValidationError("emd_loss: row " + std::to_string(i) + " does not sum to 1");
      }
    }
  }
  ad::Var diff = tape.Sub(tape.RowCumsum(probs), tape.RowCumsum(labels));
  ad::Var per_sample = tape.Sqrt(tape.Scale(tape.RowSum(tape.Mul(diff, diff)),
                                            1.0 / kNumQualityLevels));
  return tape.MeanAll(per_sample);
}

}  // namespace tfiqa
