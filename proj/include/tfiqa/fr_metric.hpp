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

#ifndef TFIQA_FR_METRIC_HPP_
#define TFIQA_FR_METRIC_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tfiqa/autodiff.hpp"
#include "tfiqa/backbone.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

// Stabilizers for the mean/variance similarity ratios, sized for
// [0,1]-scaled features.
inline constexpr double kSimilarityC1 = 1e-6;
inline constexpr double kSimilarityC2 = 1e-6;

// Per-stage first and second moments against a paired stage: one entry per
// channel (spatial stages) or embedding dimension (token stages).
// Population (divide-by-count) moments throughout.
struct StageStatistics {
  Tensor mu;   // [c_i]
  Tensor var;  // [c_i], >= 0
  Tensor cov;  // [c_i], cross-covariance with the paired stage
};

// Learnable nonnegative importance weights, one (mu, sigma) vector pair per
// pyramid stage. The raw weights stay as stored; scoring uses the view
// normalized by the global sum so the total mass is exactly 1.
struct AttentionWeights {
  std::vector<Tensor> w_mu;     // stage i: [c_i]
  std::vector<Tensor> w_sigma;  // stage i: [c_i]

  // All entries 1 (the unbiased init; normalization happens in the score).
  static AttentionWeights Uniform(const std::vector<int64_t>& stage_channels);

  int NumStages() const { return static_cast<int>(w_mu.size()); }
  std::vector<int64_t> StageChannels() const;
  double GlobalSum() const;
  double MinEntry() const;

  void ForEachParam(const std::function<void(const std::string&, Tensor&)>& fn);
  void ForEachParam(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// Channel counts of the full stage list (pixels, conv1..conv5, L token
// stages) for a given backbone topology and encoder width.
std::vector<int64_t> FullStageChannels(const BackboneSpec& backbone_spec, int encoder_layers,
                                       int encoder_dim);

// mu/sigma similarity of one channel:
//   s_mu    = (2 mu_r mu_d + c1) / (mu_r^2 + mu_d^2 + c1)
//   s_sigma = (2 cov + c2) / (var_r + var_d + c2)
// Both land in [-1, 1]; the positive constants preclude division by zero.
std::pair<double, double> Similarity(double mu_r, double mu_d, double var_r, double var_d,
                                     double cov, double c1 = kSimilarityC1,
                                     double c2 = kSimilarityC2);

// Moments of a stage pair. Spatial stages reduce over all H*W positions per
// channel; token stages over the N feature tokens per dimension. Throws
// ValidationError on kind/shape mismatch.
std::pair<StageStatistics, StageStatistics> ComputeStageStatistics(const FeatureStage& f_r,
                                                                   const FeatureStage& f_d);

// In-place max(entry, 0); applied after every optimizer step.
void ClipWeights(AttentionWeights& w);

// Full-reference score over stage-aligned pyramids:
//   score = 1 - sum_ij [ w^mu_ij s_mu(...) + w^sigma_ij s_sigma(...) ]
// with weights normalized by their global sum. Identical pyramids score
// exactly 0; any input pair stays within [0, 2]; swapping the two pyramids
// is bit-exact. If the global weight sum degenerates below 1e-12 the score
// falls back to uniform weights and emits a warning on stderr.
double FrScore(const FeaturePyramid& pyr_r, const FeaturePyramid& pyr_d,
               const AttentionWeights& w);

// ---- Tape builders for the training path.

struct AttentionWeightVars {
  std::vector<ad::Var> w_mu, w_sigma;
};

AttentionWeightVars RegisterAttentionWeights(ad::Tape& tape, const AttentionWeights& w,
                                             bool trainable,
                                             std::vector<std::pair<std::string, ad::Var>>*
                                                 bindings = nullptr);

// Similarity vectors (s_mu, s_sigma), each [1, c_i], of one frozen spatial
// stage pair. These are constants w.r.t. all learnable parameters, so
// trainers may compute them once per image pair and reuse them each step.
std::pair<Tensor, Tensor> SpatialSimilarityVectors(const FeatureStage& f_r,
                                                   const FeatureStage& f_d);

// Differentiable score from precomputed spatial similarity vectors plus the
// [N, D] feature-token vars of each encoder layer (gradients flow into
// encoder parameters through these). Stage order and channel counts must
// match the weight vectors.
ad::Var BuildFrScoreWithSpatialSims(ad::Tape& tape,
                                    const std::vector<std::pair<Tensor, Tensor>>& spatial_sims,
                                    const std::vector<ad::Var>& tokens_r,
                                    const std::vector<ad::Var>& tokens_d,
                                    const AttentionWeightVars& wvars);

// Convenience wrapper computing the spatial similarities from stage pairs.
ad::Var BuildFrScore(ad::Tape& tape, const std::vector<const FeatureStage*>& spatial_r,
                     const std::vector<const FeatureStage*>& spatial_d,
                     const std::vector<ad::Var>& tokens_r, const std::vector<ad::Var>& tokens_d,
                     const AttentionWeightVars& wvars);

}  // namespace tfiqa

#endif  // TFIQA_FR_METRIC_HPP_
