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

#include "tfiqa/encoder.hpp"

#include <cmath>
#include <utility>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

EncoderConfig EncoderConfig::FrPreset(int input_channels) {
  EncoderConfig c;
  c.num_layers = 2;
  c.model_dim = 256;
  c.num_heads = 4;
  c.mlp_hidden = 1024;
  c.dropout_rate = 0.0;
  c.max_tokens = 512;
  c.input_channels = input_channels;
  return c;
}

EncoderConfig EncoderConfig::NrPreset(int input_channels) {
  EncoderConfig c;
  c.num_layers = 2;
  c.model_dim = 32;
  c.num_heads = 8;
  c.mlp_hidden = 64;
  c.dropout_rate = 0.1;
  c.max_tokens = 512;
  c.input_channels = input_channels;
  return c;
}

void EncoderConfig::Validate() const {
  if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
  if (max_tokens < 1) throw ConfigError("encoder: max_tokens must be >= 1");
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0) {
    throw ConfigError("encoder: model_dim must be positive and divisible by num_heads");
  }
  if (mlp_hidden < 1) throw ConfigError("encoder: mlp_hidden must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("encoder: dropout_rate must be in [0, 1)");
  }
  if (input_channels < 1) throw ConfigError("encoder: input_channels must be >= 1");
}

EncoderState EncoderState::Init(const EncoderConfig& config, Rng& rng) {
  config.Validate();
  const int64_t d = config.model_dim;
  const int64_t c = config.input_channels;
  const int64_t h = config.mlp_hidden;

  auto trunc = [&rng](std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.TruncatedNormal(0.02);
    return t;
  };

  EncoderState s;
  s.config = config;
  s.proj_weight = trunc({c, d});
  s.proj_bias = Tensor({d});
  s.quality_token = trunc({d});
  s.pos_embeddings = trunc({config.max_tokens + 1, d});
  s.layers.resize(static_cast<size_t>(config.num_layers));
  for (auto& layer : s.layers) {
    layer.wq = trunc({d, d});
    layer.bq = Tensor({d});
    layer.wk = trunc({d, d});
    layer.bk = Tensor({d});
    layer.wv = trunc({d, d});
    layer.bv = Tensor({d});
    layer.wo = trunc({d, d});
    layer.bo = Tensor({d});
    layer.ln1_gamma = Tensor::Full({d}, 1.0);
    layer.ln1_beta = Tensor({d});
    layer.ln2_gamma = Tensor::Full({d}, 1.0);
    layer.ln2_beta = Tensor({d});
    layer.mlp_w1 = trunc({d, h});
    layer.mlp_b1 = Tensor({h});
    layer.mlp_w2 = trunc({h, d});
    layer.mlp_b2 = Tensor({d});
  }
  return s;
}

namespace {

template <typename State, typename Fn>
void WalkParams(State& s, const Fn& fn) {
  fn("encoder/proj.weight", s.proj_weight);
  fn("encoder/proj.bias", s.proj_bias);
  fn("encoder/quality_token", s.quality_token);
  fn("encoder/pos_embeddings", s.pos_embeddings);
  for (size_t i = 0; i < s.layers.size(); ++i) {
    auto& l = s.layers[i];
    const std::string p = "encoder/layer" + std::to_string(i) + "/";
    fn(p + "attn.wq", l.wq);
    fn(p + "attn.bq", l.bq);
    fn(p + "attn.wk", l.wk);
    fn(p + "attn.bk", l.bk);
    fn(p + "attn.wv", l.wv);
    fn(p + "attn.bv", l.bv);
    fn(p + "attn.wo", l.wo);
    fn(p + "attn.bo", l.bo);
    fn(p + "ln1.gamma", l.ln1_gamma);
    fn(p + "ln1.beta", l.ln1_beta);
    fn(p + "ln2.gamma", l.ln2_gamma);
    fn(p + "ln2.beta", l.ln2_beta);
    fn(p + "mlp.w1", l.mlp_w1);
    fn(p + "mlp.b1", l.mlp_b1);
    fn(p + "mlp.w2", l.mlp_w2);
    fn(p + "mlp.b2", l.mlp_b2);
  }
}

}  // namespace

void EncoderState::ForEachParam(const std::function<void(const std::string&, Tensor&)>& fn) {
  WalkParams(*this, fn);
}

void EncoderState::ForEachParam(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  WalkParams(*this, fn);
}

EncoderVars RegisterEncoder(ad::Tape& tape, const EncoderState& state, bool trainable,
                            std::vector<std::pair<std::string, ad::Var>>* bindings) {
  EncoderVars vars;
  std::vector<ad::Var*> slots = {&vars.proj_weight, &vars.proj_bias, &vars.quality_token,
                                 &vars.pos_embeddings};
  vars.layers.resize(state.layers.size());
  for (auto& l : vars.layers) {
    for (ad::Var* v : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gamma,
                       &l.ln1_beta, &l.ln2_gamma, &l.ln2_beta, &l.mlp_w1, &l.mlp_b1, &l.mlp_w2,
                       &l.mlp_b2}) {
      slots.push_back(v);
    }
  }
  size_t next = 0;
  state.ForEachParam([&](const std::string& name, const Tensor& t) {
    ad::Var v = trainable ? tape.Param(t) : tape.Constant(t);
    *slots[next++] = v;
    if (trainable && bindings) bindings->emplace_back(name, v);
  });
  return vars;
}

namespace {

// Average-pool the spatial grid by 2 per axis (ceil semantics, partial
// windows averaged over present samples) until H*W <= max_tokens.
Tensor PoolToTokenBudget(const Tensor& stage, int max_tokens) {
  Tensor cur = stage;
  while (cur.dim(1) * cur.dim(2) > max_tokens) {
    const int64_t c = cur.dim(0);
    const int64_t h = (cur.dim(1) + 1) / 2;
    const int64_t w = (cur.dim(2) + 1) / 2;
    if (h == cur.dim(1) && w == cur.dim(2)) {
      throw ConfigError("encoder: max_tokens too small for any spatial grid");
    }
    Tensor next({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          double acc = 0.0;
          int cnt = 0;
          for (int64_t dy = 0; dy < 2; ++dy) {
            for (int64_t dx = 0; dx < 2; ++dx) {
              const int64_t sy = 2 * y + dy;
              const int64_t sx = 2 * x + dx;
              if (sy < cur.dim(1) && sx < cur.dim(2)) {
                acc += cur.At(ch, sy, sx);
                ++cnt;
              }
            }
          }
          next.At(ch, y, x) = acc / cnt;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

ad::Var BuildTokenProjection(ad::Tape& tape, const Tensor& spatial_stage, const EncoderVars& vars,
                             const EncoderConfig& config, int64_t* grid_h, int64_t* grid_w) {
  if (spatial_stage.ndim() != 3) {
    throw ValidationError("token projection expects a spatial [C, H, W] stage");
  }
  if (spatial_stage.dim(0) != config.input_channels) {
    throw ConfigError("token projection: stage has " + std::to_string(spatial_stage.dim(0)) +
                      " channels but the encoder projection expects " +
                      std::to_string(config.input_channels));
  }
  spatial_stage.CheckFinite("encoder input stage");

  const Tensor pooled = PoolToTokenBudget(spatial_stage, config.max_tokens);
  const int64_t c = pooled.dim(0);
  const int64_t h = pooled.dim(1);
  const int64_t w = pooled.dim(2);
  const int64_t n = h * w;
  if (grid_h) *grid_h = h;
  if (grid_w) *grid_w = w;

  // Row-major flatten: token t = y * W' + x carries the channel vector at
  // that grid position.
  Tensor tok({n, c});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t i = 0; i < n; ++i) tok.At(i, ch) = pooled[ch * n + i];
  }

  ad::Var feats = tape.MatMul(tape.Constant(std::move(tok)), vars.proj_weight);
  feats = tape.AddRowVec(feats, vars.proj_bias);
  ad::Var qrow = tape.Reshape(vars.quality_token, {1, config.model_dim});
  ad::Var y0 = tape.ConcatRows({qrow, feats});
  ad::Var pos = tape.SliceRows(vars.pos_embeddings, 0, n + 1);
  return tape.Add(y0, pos);
}

std::vector<ad::Var> BuildEncoderLayers(ad::Tape& tape, ad::Var y0, const EncoderVars& vars,
                                        const EncoderConfig& config, bool training,
                                        Rng* dropout_rng) {
  const int64_t d = config.model_dim;
  const int heads = config.num_heads;
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = training && config.dropout_rate > 0.0;
  if (use_dropout && dropout_rng == nullptr) {
    throw ConfigError("encoder: training with dropout requires an RNG");
  }

  std::vector<ad::Var> outputs;
  ad::Var x = y0;
  for (size_t li = 0; li < vars.layers.size(); ++li) {
    const auto& l = vars.layers[li];

    ad::Var q = tape.AddRowVec(tape.MatMul(x, l.wq), l.bq);
    ad::Var k = tape.AddRowVec(tape.MatMul(x, l.wk), l.bk);
    ad::Var v = tape.AddRowVec(tape.MatMul(x, l.wv), l.bv);

    std::vector<ad::Var> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      ad::Var qh = tape.SliceCols(q, hd * dh, dh);
      ad::Var kh = tape.SliceCols(k, hd * dh, dh);
      ad::Var vh = tape.SliceCols(v, hd * dh, dh);
      ad::Var scores = tape.Scale(tape.MatMul(qh, tape.Transpose(kh)), scale);
      ad::Var attn = tape.SoftmaxRows(scores);
      head_outputs.push_back(tape.MatMul(attn, vh));
    }
    ad::Var mha = tape.ConcatCols(head_outputs);
    mha = tape.AddRowVec(tape.MatMul(mha, l.wo), l.bo);
    if (use_dropout) mha = tape.Dropout(mha, config.dropout_rate, *dropout_rng);

    ad::Var ystar = tape.LayerNorm(tape.Add(mha, x), l.ln1_gamma, l.ln1_beta, kLayerNormEpsilon);

    ad::Var hidden = tape.Relu(tape.AddRowVec(tape.MatMul(ystar, l.mlp_w1), l.mlp_b1));
    if (use_dropout) hidden = tape.Dropout(hidden, config.dropout_rate, *dropout_rng);
    ad::Var mlp_out = tape.AddRowVec(tape.MatMul(hidden, l.mlp_w2), l.mlp_b2);
    if (use_dropout) mlp_out = tape.Dropout(mlp_out, config.dropout_rate, *dropout_rng);

    ad::Var y = tape.LayerNorm(tape.Add(mlp_out, ystar), l.ln2_gamma, l.ln2_beta,
                               kLayerNormEpsilon);
    if (!tape.Value(y).AllFinite()) {
      throw NumericError("encoder layer " + std::to_string(li + 1) +
                         " produced non-finite values");
    }
    outputs.push_back(y);
    x = y;
  }
  return outputs;
}

TokenSequence ProjectTokens(const FeatureStage& stage, const EncoderState& state) {
  if (stage.kind != StageKind::kSpatial) {
    throw ValidationError("project_tokens expects a spatial stage");
  }
  ad::Tape tape;
  EncoderVars vars = RegisterEncoder(tape, state, /*trainable=*/false);
  TokenSequence seq;
  ad::Var y0 = BuildTokenProjection(tape, stage.data, vars, state.config, &seq.grid_h, &seq.grid_w);
  seq.tokens = tape.Value(y0);
  return seq;
}

std::vector<TokenSequence> Encode(const TokenSequence& y0, const EncoderState& state, bool training,
                                  Rng* dropout_rng) {
  y0.tokens.CheckFinite("encoder input tokens");
  ad::Tape tape;
  EncoderVars vars = RegisterEncoder(tape, state, /*trainable=*/false);
  ad::Var y0v = tape.Constant(y0.tokens);
  std::vector<ad::Var> layer_vars =
      BuildEncoderLayers(tape, y0v, vars, state.config, training, dropout_rng);
  std::vector<TokenSequence> out;
  out.reserve(layer_vars.size());
  for (ad::Var v : layer_vars) {
    out.push_back(TokenSequence{tape.Value(v), y0.grid_h, y0.grid_w});
  }
  return out;
}

FeaturePyramid BuildFullPyramid(const ImageTensor& image, const Backbone& backbone,
                                const EncoderState& encoder) {
  FeaturePyramid pyr = backbone.ExtractFeatures(image);
  const FeatureStage& deepest = pyr.stages.back();
  TokenSequence y0 = ProjectTokens(deepest, encoder);
  std::vector<TokenSequence> layer_outputs = Encode(y0, encoder);
  int next_index = deepest.stage_index + 1;
  for (const TokenSequence& seq : layer_outputs) {
    // Feature tokens only; the quality token belongs to the NR branch.
    Tensor feats({seq.NumFeatureTokens(), seq.tokens.cols()});
    for (int64_t i = 0; i < feats.rows(); ++i) {
      for (int64_t j = 0; j < feats.cols(); ++j) feats.At(i, j) = seq.tokens.At(i + 1, j);
    }
    pyr.stages.push_back(FeatureStage{StageKind::kTokens, next_index++, std::move(feats)});
  }
  return pyr;
}

}  // namespace tfiqa
