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

#ifndef TFIQA_ENCODER_HPP_
#define TFIQA_ENCODER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "tfiqa/autodiff.hpp"
#include "tfiqa/backbone.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

class Rng;

struct EncoderConfig {
  int num_layers = 2;
  int model_dim = 256;
  int num_heads = 4;
  int mlp_hidden = 1024;
  double dropout_rate = 0.0;
  int max_tokens = 512;
  int input_channels = 64;  // channels of the CNN stage feeding the encoder

  // FR preset: 2 layers, dim 256, 4 heads, MLP 1024.
  static EncoderConfig FrPreset(int input_channels);
  // NR preset (also used by the unified model): 2 layers, dim 32, 8 heads,
  // MLP 64, dropout 0.1.
  static EncoderConfig NrPreset(int input_channels);

  void Validate() const;  // throws ConfigError
};

// One token sequence: row 0 is the quality token, rows 1..N the feature
// tokens from an H' x W' spatial grid flattened row-major.
struct TokenSequence {
  Tensor tokens;  // [N+1, D]
  int64_t grid_h = 0;
  int64_t grid_w = 0;

  int64_t NumFeatureTokens() const { return tokens.rows() - 1; }
};

// Learnable encoder parameters, shared Siamese-style: the same instance
// encodes reference and distorted images and serves both FR and NR branches.
struct EncoderState {
  struct Layer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;              // attention projections
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;    // post-norm affine
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };

  EncoderConfig config;
  Tensor proj_weight;     // [C, D] 1x1-conv projection
  Tensor proj_bias;       // [D]
  Tensor quality_token;   // [D]
  Tensor pos_embeddings;  // [N_max+1, D]; row 0 belongs to the quality token
  std::vector<Layer> layers;

  // Truncated-normal(0.02) embeddings and projections, ones/zeros LayerNorm.
  static EncoderState Init(const EncoderConfig& config, Rng& rng);

  // Stable-order parameter walk (checkpointing, optimizers, grad checks).
  void ForEachParam(const std::function<void(const std::string&, Tensor&)>& fn);
  void ForEachParam(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

inline constexpr double kLayerNormEpsilon = 1e-6;

// ---- Tape builders (single numeric code path for training and inference).

// Tape handles for every encoder parameter, registered once per tape so the
// Siamese property is parameter identity, not copied weights.
struct EncoderVars {
  struct Layer {
    ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Var ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    ad::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };
  ad::Var proj_weight, proj_bias, quality_token, pos_embeddings;
  std::vector<Layer> layers;
};

// trainable=true registers Params and appends (name, var) to `bindings`;
// otherwise registers Constants.
EncoderVars RegisterEncoder(ad::Tape& tape, const EncoderState& state, bool trainable,
                            std::vector<std::pair<std::string, ad::Var>>* bindings = nullptr);

// Projection + quality token + positional embeddings: y0.
// Grids larger than max_tokens are average-pooled by 2 per axis (before
// projection) until they fit. Throws ConfigError on channel mismatch.
ad::Var BuildTokenProjection(ad::Tape& tape, const Tensor& spatial_stage, const EncoderVars& vars,
                             const EncoderConfig& config, int64_t* grid_h = nullptr,
                             int64_t* grid_w = nullptr);

// The L post-norm layers; returns all layer outputs y_1..y_L.
// Dropout (training only) applies to the attention output and to both MLP
// layers. Throws NumericError naming the layer on non-finite intermediates.
std::vector<ad::Var> BuildEncoderLayers(ad::Tape& tape, ad::Var y0, const EncoderVars& vars,
                                        const EncoderConfig& config, bool training,
                                        Rng* dropout_rng);

// ---- Plain wrappers over the tape builders.

TokenSequence ProjectTokens(const FeatureStage& stage, const EncoderState& state);

std::vector<TokenSequence> Encode(const TokenSequence& y0, const EncoderState& state,
                                  bool training = false, Rng* dropout_rng = nullptr);

// Full pyramid for scoring: pixels, five CNN stages, then the L encoder
// layer outputs as token stages (quality token dropped).
FeaturePyramid BuildFullPyramid(const ImageTensor& image, const Backbone& backbone,
                                const EncoderState& encoder);

}  // namespace tfiqa

#endif  // TFIQA_ENCODER_HPP_
