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

#include "tfiqa/backbone.hpp"

#include <Eigen/Core>

#include <cmath>
#include <sstream>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string PoolName(PoolKind pool) { return pool == PoolKind::kMax ? "max" : "l2"; }

// 3x3 zero-padded convolution + bias + ReLU via im2col and one GEMM.
Tensor ConvRelu(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  const int64_t cin = in.dim(0);
  const int64_t h = in.dim(1);
  const int64_t w = in.dim(2);
  const int64_t cout = weight.dim(0);

  EMatrix cols(h * w, cin * 9);
  cols.setZero();
  for (int64_t c = 0; c < cin; ++c) {
    for (int64_t ky = -1; ky <= 1; ++ky) {
      for (int64_t kx = -1; kx <= 1; ++kx) {
        const int64_t col = (c * 3 + (ky + 1)) * 3 + (kx + 1);
        for (int64_t y = 0; y < h; ++y) {
          const int64_t sy = y + ky;
          if (sy < 0 || sy >= h) continue;
          for (int64_t x = 0; x < w; ++x) {
            const int64_t sx = x + kx;
            if (sx < 0 || sx >= w) continue;
            cols(y * w + x, col) = in.At(c, sy, sx);
          }
        }
      }
    }
  }
  Eigen::Map<const EMatrix> wmat(weight.data(), cout, cin * 9);
  EMatrix prod = cols * wmat.transpose();  // [H*W, cout]

  Tensor out({cout, h, w});
  for (int64_t oc = 0; oc < cout; ++oc) {
    const double b = bias[oc];
    for (int64_t i = 0; i < h * w; ++i) {
      const double v = prod(i, oc) + b;
      out[oc * h * w + i] = v > 0.0 ? v : 0.0;
    }
  }
  return out;
}

// 2x2 stride-2 pooling, floor semantics on odd sizes.
Tensor Pool2(const Tensor& in, PoolKind kind) {
  const int64_t c = in.dim(0);
  const int64_t h = in.dim(1) / 2;
  const int64_t w = in.dim(2) / 2;
  Tensor out({c, h, w});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double a = in.At(ch, 2 * y, 2 * x);
        const double b = in.At(ch, 2 * y, 2 * x + 1);
        const double d = in.At(ch, 2 * y + 1, 2 * x);
        const double e = in.At(ch, 2 * y + 1, 2 * x + 1);
        if (kind == PoolKind::kMax) {
          out.At(ch, y, x) = std::max(std::max(a, b), std::max(d, e));
        } else {
          out.At(ch, y, x) = std::sqrt(0.25 * (a * a + b * b + d * d + e * e));
        }
      }
    }
  }
  return out;
}

}  // namespace

BackboneSpec BackboneSpec::Vgg16() {
  BackboneSpec s;
  s.name = "vgg16";
  s.blocks = {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  s.pool = PoolKind::kMax;
  s.norm_mean = {0.485, 0.456, 0.406};
  s.norm_std = {0.229, 0.224, 0.225};
  return s;
}

BackboneSpec BackboneSpec::Tiny() {
  BackboneSpec s;
  s.name = "tiny8";
  s.blocks = {{8}, {16}, {32}, {64}, {64}};
  s.pool = PoolKind::kMax;
  s.norm_mean = {0.5, 0.5, 0.5};
  s.norm_std = {0.5, 0.5, 0.5};
  return s;
}

std::vector<std::pair<std::string, std::vector<int64_t>>> BackboneSpec::LayerShapes() const {
  std::vector<std::pair<std::string, std::vector<int64_t>>> out;
  int64_t cin = 3;
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (size_t l = 0; l < blocks[b].size(); ++l) {
      const int64_t cout = blocks[b][l];
      const std::string name = "conv" + std::to_string(b + 1) + "_" + std::to_string(l + 1);
      out.emplace_back(name, std::vector<int64_t>{cout, cin, 3, 3});
      cin = cout;
    }
  }
  return out;
}

Backbone Backbone::Random(const BackboneSpec& spec, uint64_t seed) {
  Backbone bb(spec, spec.name + "-" + PoolName(spec.pool) + "-seed" + std::to_string(seed));
  Rng rng = Rng(seed).Stream("backbone-init");
  for (const auto& [name, shape] : spec.LayerShapes()) {
    const int64_t fan_in = shape[1] * shape[2] * shape[3];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor w = Tensor::RandomNormal(shape, rng, stddev);
    // Weight containers store float32; quantize at creation so the on-disk
    // round trip is bit-exact.
    for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(static_cast<float>(w[i]));
    bb.weights_.push_back(std::move(w));
    bb.biases_.push_back(Tensor({shape[0]}));
  }
  return bb;
}

Backbone Backbone::FromContainer(const TensorContainer& container, const BackboneSpec& spec,
                                 const std::string& id_override) {
  Backbone bb(spec, id_override.empty() ? spec.name + "-" + PoolName(spec.pool) + "-file"
                                        : id_override);
  std::ostringstream problems;
  for (const auto& [name, shape] : spec.LayerShapes()) {
    const std::string wname = name + ".weight";
    const std::string bname = name + ".bias";
    const std::vector<int64_t> bias_shape{shape[0]};
    if (!container.Has(wname)) {
      problems << "  " << wname << ": expected " << ShapeToString(shape) << ", missing\n";
    } else if (container.Get(wname).shape() != shape) {
      problems << "  " << wname << ": expected " << ShapeToString(shape) << ", found "
               << ShapeToString(container.Get(wname).shape()) << "\n";
    }
    if (!container.Has(bname)) {
      problems << "  " << bname << ": expected " << ShapeToString(bias_shape) << ", missing\n";
    } else if (container.Get(bname).shape() != bias_shape) {
      problems << "  " << bname << ": expected " << ShapeToString(bias_shape) << ", found "
               << ShapeToString(container.Get(bname).shape()) << "\n";
    }
  }
  const std::string msg = problems.str();
  if (!msg.empty()) {
    throw ValidationError("backbone weight container does not match spec '" + spec.name +
                          "':\n" + msg);
  }
  for (const auto& [name, shape] : spec.LayerShapes()) {
    (void)shape;
    bb.weights_.push_back(container.Get(name + ".weight"));
    bb.biases_.push_back(container.Get(name + ".bias"));
  }
  return bb;
}

FeaturePyramid Backbone::ExtractFeatures(const ImageTensor& image) const {
  ValidateImage(image);
  const int64_t h = image.dim(1);
  const int64_t w = image.dim(2);
  // Four stride-2 pools sit in front of the deepest tap; each side must be
  // at least 32 for five usable stages.
  if (h < 32 || w < 32) {
    int64_t side = std::min(h, w);
    int empty_stage = 0;
    for (int s = 2; s <= 5; ++s) {
      side /= 2;
      if (side < 1) {
        empty_stage = s;
        break;
      }
    }
    std::string detail = empty_stage > 0
                             ? "stage " + std::to_string(empty_stage) +
                                   " would be empty after downsampling"
                             : "below the supported 32x32 minimum";
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) +
                          " is too small for the 5-stage backbone: " + detail);
  }

  FeaturePyramid pyr;
  pyr.backbone_id = id_;
  pyr.stages.push_back(FeatureStage{StageKind::kSpatial, 0, image});

  // Per-channel normalization applies to the network input only; stage 0
  // keeps the raw [0,1] pixels.
  Tensor x({3, h, w});
  for (int64_t c = 0; c < 3; ++c) {
    const double mean = spec_.norm_mean[static_cast<size_t>(c)];
    const double inv_std = 1.0 / spec_.norm_std[static_cast<size_t>(c)];
    for (int64_t i = 0; i < h * w; ++i) {
      x[c * h * w + i] = (image[c * h * w + i] - mean) * inv_std;
    }
  }

  size_t layer = 0;
  for (int b = 0; b < spec_.NumBlocks(); ++b) {
    if (b > 0) x = Pool2(x, spec_.pool);
    for (size_t l = 0; l < spec_.blocks[static_cast<size_t>(b)].size(); ++l) {
      x = ConvRelu(x, weights_[layer], biases_[layer]);
      ++layer;
    }
    pyr.stages.push_back(FeatureStage{StageKind::kSpatial, b + 1, x});
  }
  return pyr;
}

TensorContainer Backbone::ToContainer() const {
  TensorContainer c;
  c.metadata_json = "{\"kind\":\"backbone\",\"spec\":\"" + spec_.name + "\",\"pool\":\"" +
                    PoolName(spec_.pool) + "\"}";
  size_t layer = 0;
  for (const auto& [name, shape] : spec_.LayerShapes()) {
    (void)shape;
    c.PutF32(name + ".weight", weights_[layer]);
    c.PutF32(name + ".bias", biases_[layer]);
    ++layer;
  }
  return c;
}

Backbone LoadBackbone(const std::string& weights_path, const BackboneSpec& spec) {
  return Backbone::FromContainer(ReadContainer(weights_path), spec);
}

void SaveBackbone(const std::string& weights_path, const Backbone& backbone) {
  WriteContainer(weights_path, backbone.ToContainer());
}

FeaturePyramid ExtractCnnFeatures(const ImageTensor& image, const Backbone& backbone) {
  return backbone.ExtractFeatures(image);
}

}  // namespace tfiqa
