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

#include "tfiqa/fr_metric.hpp"

#include <cmath>
#include <iostream>

#include "tfiqa/common.hpp"

namespace tfiqa {

AttentionWeights AttentionWeights::Uniform(const std::vector<int64_t>& stage_channels) {
  AttentionWeights w;
  for (int64_t c : stage_channels) {
    if (c < 1) throw ValidationError("attention weights: stage channel count must be >= 1");
    w.w_mu.push_back(Tensor::Full({c}, 1.0));
    w.w_sigma.push_back(Tensor::Full({c}, 1.0));
  }
  return w;
}

std::vector<int64_t> AttentionWeights::StageChannels() const {
  std::vector<int64_t> out;
  out.reserve(w_mu.size());
  for (const Tensor& t : w_mu) out.push_back(t.size());
  return out;
}

double AttentionWeights::GlobalSum() const {
  double s = 0.0;
  for (const Tensor& t : w_mu) s += t.Sum();
  for (const Tensor& t : w_sigma) s += t.Sum();
  return s;
}

double AttentionWeights::MinEntry() const {
  double m = 0.0;
  bool first = true;
  for (const auto* group : {&w_mu, &w_sigma}) {
    for (const Tensor& t : *group) {
      if (t.size() == 0) continue;
      const double v = t.MinValue();
      m = first ? v : std::min(m, v);
      first = false;
    }
  }
  return m;
}

namespace {

template <typename W, typename Fn>
void WalkWeights(W& w, const Fn& fn) {
  for (size_t i = 0; i < w.w_mu.size(); ++i) {
    fn("attn/stage" + std::to_string(i) + ".mu", w.w_mu[i]);
    fn("attn/stage" + std::to_string(i) + ".sigma", w.w_sigma[i]);
  }
}

}  // namespace

void AttentionWeights::ForEachParam(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  WalkWeights(*this, fn);
}

void AttentionWeights::ForEachParam(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  WalkWeights(*this, fn);
}

std::vector<int64_t> FullStageChannels(const BackboneSpec& backbone_spec, int encoder_layers,
                                       int encoder_dim) {
  std::vector<int64_t> out{3};
  for (const auto& block : backbone_spec.blocks) out.push_back(block.back());
  for (int i = 0; i < encoder_layers; ++i) out.push_back(encoder_dim);
  return out;
}

std::pair<double, double> Similarity(double mu_r, double mu_d, double var_r, double var_d,
                                     double cov, double c1, double c2) {
  if (c1 <= 0.0 || c2 <= 0.0) throw ValidationError("similarity: c1 and c2 must be positive");
  const double s_mu = (2.0 * mu_r * mu_d + c1) / (mu_r * mu_r + mu_d * mu_d + c1);
  const double s_sigma = (2.0 * cov + c2) / (var_r + var_d + c2);
  return {s_mu, s_sigma};
}

std::pair<StageStatistics, StageStatistics> ComputeStageStatistics(const FeatureStage& f_r,
                                                                   const FeatureStage& f_d) {
  if (f_r.kind != f_d.kind || !f_r.data.SameShape(f_d.data)) {
    throw ValidationError("stage statistics: stage kind/shape mismatch at stage index " +
                          std::to_string(f_r.stage_index));
  }
  f_r.data.CheckFinite("reference stage");
  f_d.data.CheckFinite("distorted stage");

  // Unify both layouts as [count, channels] walks: spatial stages reduce
  // over positions per channel, token stages over tokens per dimension.
  const bool spatial = f_r.kind == StageKind::kSpatial;
  const int64_t channels = spatial ? f_r.data.dim(0) : f_r.data.dim(1);
  const int64_t count = spatial ? f_r.data.dim(1) * f_r.data.dim(2) : f_r.data.dim(0);

  auto value = [&](const Tensor& t, int64_t c, int64_t i) {
    return spatial ? t[c * count + i] : t.At(i, c);
  };

  StageStatistics sr, sd;
  sr.mu = Tensor({channels});
  sr.var = Tensor({channels});
  sr.cov = Tensor({channels});
  sd = sr;
  const double inv = 1.0 / static_cast<double>(count);
  for (int64_t c = 0; c < channels; ++c) {
    double sum_r = 0.0;
    double sum_d = 0.0;
    for (int64_t i = 0; i < count; ++i) {
      sum_r += value(f_r.data, c, i);
      sum_d += value(f_d.data, c, i);
    }
    const double mu_r = sum_r * inv;
    const double mu_d = sum_d * inv;
    double var_r = 0.0;
    double var_d = 0.0;
    double cov = 0.0;
    for (int64_t i = 0; i < count; ++i) {
      const double cr = value(f_r.data, c, i) - mu_r;
      const double cd = value(f_d.data, c, i) - mu_d;
      var_r += cr * cr;
      var_d += cd * cd;
      cov += cr * cd;
    }
    sr.mu[c] = mu_r;
    sr.var[c] = var_r * inv;
    sr.cov[c] = cov * inv;
    sd.mu[c] = mu_d;
    sd.var[c] = var_d * inv;
    sd.cov[c] = cov * inv;
  }
  return {sr, sd};
}

void ClipWeights(AttentionWeights& w) {
  for (auto* group : {&w.w_mu, &w.w_sigma}) {
    for (Tensor& t : *group) {
      for (int64_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0.0) t[i] = 0.0;
      }
    }
  }
}

AttentionWeightVars RegisterAttentionWeights(ad::Tape& tape, const AttentionWeights& w,
                                             bool trainable,
                                             std::vector<std::pair<std::string, ad::Var>>*
                                                 bindings) {
  AttentionWeightVars vars;
  for (size_t i = 0; i < w.w_mu.size(); ++i) {
    ad::Var vm = trainable ? tape.Param(w.w_mu[i]) : tape.Constant(w.w_mu[i]);
    ad::Var vs = trainable ? tape.Param(w.w_sigma[i]) : tape.Constant(w.w_sigma[i]);
    vars.w_mu.push_back(vm);
    vars.w_sigma.push_back(vs);
    if (trainable && bindings) {
      bindings->emplace_back("attn/stage" + std::to_string(i) + ".mu", vm);
      bindings->emplace_back("attn/stage" + std::to_string(i) + ".sigma", vs);
    }
  }
  return vars;
}

std::pair<Tensor, Tensor> SpatialSimilarityVectors(const FeatureStage& f_r,
                                                   const FeatureStage& f_d) {
  auto [sr, sd] = ComputeStageStatistics(f_r, f_d);
  const int64_t channels = sr.mu.size();
  Tensor s_mu({1, channels});
  Tensor s_sigma({1, channels});
  for (int64_t c = 0; c < channels; ++c) {
    auto [m, s] = Similarity(sr.mu[c], sd.mu[c], sr.var[c], sd.var[c], sr.cov[c]);
    s_mu[c] = m;
    s_sigma[c] = s;
  }
  return {std::move(s_mu), std::move(s_sigma)};
}

namespace {

// Similarity vectors of one token stage pair, on-tape ([N, D] feature
// tokens; reductions over tokens, one similarity per embedding dimension).
std::pair<ad::Var, ad::Var> TokenSimilarityVectors(ad::Tape& tape, ad::Var tok_r, ad::Var tok_d) {
  ad::Var mu_r = tape.ColMean(tok_r);
  ad::Var mu_d = tape.ColMean(tok_d);
  ad::Var cen_r = tape.SubRowVec(tok_r, mu_r);
  ad::Var cen_d = tape.SubRowVec(tok_d, mu_d);
  ad::Var var_r = tape.ColMean(tape.Mul(cen_r, cen_r));
  ad::Var var_d = tape.ColMean(tape.Mul(cen_d, cen_d));
  ad::Var cov = tape.ColMean(tape.Mul(cen_r, cen_d));

  ad::Var s_mu = tape.Div(tape.AddScalar(tape.Scale(tape.Mul(mu_r, mu_d), 2.0), kSimilarityC1),
                          tape.AddScalar(tape.Add(tape.Mul(mu_r, mu_r), tape.Mul(mu_d, mu_d)),
                                         kSimilarityC1));
  ad::Var s_sigma = tape.Div(tape.AddScalar(tape.Scale(cov, 2.0), kSimilarityC2),
                             tape.AddScalar(tape.Add(var_r, var_d), kSimilarityC2));
  return {s_mu, s_sigma};
}

}  // namespace

ad::Var BuildFrScoreWithSpatialSims(ad::Tape& tape,
                                    const std::vector<std::pair<Tensor, Tensor>>& spatial_sims,
                                    const std::vector<ad::Var>& tokens_r,
                                    const std::vector<ad::Var>& tokens_d,
                                    const AttentionWeightVars& wvars) {
  if (tokens_r.size() != tokens_d.size()) {
    throw ValidationError("fr_score: pyramids are not stage-aligned");
  }
  const size_t num_stages = spatial_sims.size() + tokens_r.size();
  if (wvars.w_mu.size() != num_stages) {
    throw ValidationError("fr_score: weight stage count " + std::to_string(wvars.w_mu.size()) +
                          " does not match pyramid stage count " + std::to_string(num_stages));
  }

  // Degenerate all-zero weights would make the normalized view undefined;
  // fall back to uniform mass.
  double raw_sum = 0.0;
  for (size_t i = 0; i < wvars.w_mu.size(); ++i) {
    raw_sum += tape.Value(wvars.w_mu[i]).Sum() + tape.Value(wvars.w_sigma[i]).Sum();
  }
  AttentionWeightVars effective = wvars;
  if (raw_sum < 1e-12) {
    std::cerr << "tfiqa: warning: attention weights sum to ~0; falling back to uniform weights\n";
    effective.w_mu.clear();
    effective.w_sigma.clear();
    for (size_t i = 0; i < wvars.w_mu.size(); ++i) {
      effective.w_mu.push_back(tape.Constant(Tensor::Full(tape.Value(wvars.w_mu[i]).shape(), 1.0)));
      effective.w_sigma.push_back(
          tape.Constant(Tensor::Full(tape.Value(wvars.w_sigma[i]).shape(), 1.0)));
    }
  }

  ad::Var weighted_total;  // sum over stages of w.s contributions
  ad::Var weight_total;    // global weight mass, same accumulation order
  size_t stage = 0;
  auto accumulate = [&](ad::Var s_mu, ad::Var s_sigma) {
    const int64_t len = tape.Value(s_mu).size();
    if (tape.Value(effective.w_mu[stage]).size() != len ||
        tape.Value(effective.w_sigma[stage]).size() != len) {
      throw ValidationError("fr_score: weight length mismatch at stage " + std::to_string(stage));
    }
    ad::Var wm = tape.Reshape(effective.w_mu[stage], {1, len});
    ad::Var ws = tape.Reshape(effective.w_sigma[stage], {1, len});
    ad::Var contrib = tape.Add(tape.SumAll(tape.Mul(wm, s_mu)), tape.SumAll(tape.Mul(ws, s_sigma)));
    ad::Var mass = tape.Add(tape.SumAll(wm), tape.SumAll(ws));
    weighted_total = weighted_total.valid() ? tape.Add(weighted_total, contrib) : contrib;
    weight_total = weight_total.valid() ? tape.Add(weight_total, mass) : mass;
    ++stage;
  };

  for (const auto& [s_mu, s_sigma] : spatial_sims) {
    accumulate(tape.Constant(s_mu), tape.Constant(s_sigma));
  }
  for (size_t i = 0; i < tokens_r.size(); ++i) {
    const Tensor& tr = tape.Value(tokens_r[i]);
    const Tensor& td = tape.Value(tokens_d[i]);
    if (!tr.SameShape(td)) {
      throw ValidationError("fr_score: token stage shape mismatch at stage " +
                            std::to_string(stage));
    }
    auto [s_mu, s_sigma] = TokenSimilarityVectors(tape, tokens_r[i], tokens_d[i]);
    accumulate(s_mu, s_sigma);
  }

  // score = 1 - (weighted similarity) / (weight mass)
  return tape.AddScalar(tape.Scale(tape.DivByScalar(weighted_total, weight_total), -1.0), 1.0);
}

ad::Var BuildFrScore(ad::Tape& tape, const std::vector<const FeatureStage*>& spatial_r,
                     const std::vector<const FeatureStage*>& spatial_d,
                     const std::vector<ad::Var>& tokens_r, const std::vector<ad::Var>& tokens_d,
                     const AttentionWeightVars& wvars) {
  if (spatial_r.size() != spatial_d.size()) {
    throw ValidationError("fr_score: pyramids are not stage-aligned");
  }
  std::vector<std::pair<Tensor, Tensor>> sims;
  sims.reserve(spatial_r.size());
  for (size_t i = 0; i < spatial_r.size(); ++i) {
    sims.push_back(SpatialSimilarityVectors(*spatial_r[i], *spatial_d[i]));
  }
  return BuildFrScoreWithSpatialSims(tape, sims, tokens_r, tokens_d, wvars);
}

namespace {

void ValidatePyramidPair(const FeaturePyramid& pyr_r, const FeaturePyramid& pyr_d) {
  if (pyr_r.stages.size() != pyr_d.stages.size()) {
    throw ValidationError("fr_score: pyramids have different stage counts");
  }
  for (size_t i = 0; i < pyr_r.stages.size(); ++i) {
    const FeatureStage& r = pyr_r.stages[i];
    const FeatureStage& d = pyr_d.stages[i];
    if (r.stage_index != static_cast<int>(i) || d.stage_index != static_cast<int>(i)) {
      throw ValidationError("fr_score: stage indices must increase from 0");
    }
    if (r.kind != d.kind || !r.data.SameShape(d.data)) {
      throw ValidationError("fr_score: stage " + std::to_string(i) + " kind/shape mismatch");
    }
  }
  if (pyr_r.stages.empty() || pyr_r.stages[0].kind != StageKind::kSpatial ||
      pyr_r.stages[0].data.dim(0) != 3) {
    throw ValidationError("fr_score: stage 0 must be the [3, H, W] pixel stage");
  }
}

}  // namespace

double FrScore(const FeaturePyramid& pyr_r, const FeaturePyramid& pyr_d,
               const AttentionWeights& w) {
  ValidatePyramidPair(pyr_r, pyr_d);

  ad::Tape tape;
  std::vector<const FeatureStage*> spatial_r, spatial_d;
  std::vector<ad::Var> tokens_r, tokens_d;
  for (size_t i = 0; i < pyr_r.stages.size(); ++i) {
    if (pyr_r.stages[i].kind == StageKind::kSpatial) {
      if (!tokens_r.empty()) {
        throw ValidationError("fr_score: spatial stages must precede token stages");
      }
      spatial_r.push_back(&pyr_r.stages[i]);
      spatial_d.push_back(&pyr_d.stages[i]);
    } else {
      tokens_r.push_back(tape.Constant(pyr_r.stages[i].data));
      tokens_d.push_back(tape.Constant(pyr_d.stages[i].data));
    }
  }
  AttentionWeightVars wvars = RegisterAttentionWeights(tape, w, /*trainable=*/false);
  ad::Var score = BuildFrScore(tape, spatial_r, spatial_d, tokens_r, tokens_d, wvars);
  return tape.Value(score)[0];
}

}  // namespace tfiqa
