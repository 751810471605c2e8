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

#ifndef TFIQA_BACKBONE_HPP_
#define TFIQA_BACKBONE_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tfiqa/container.hpp"
#include "tfiqa/image.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

enum class StageKind { kSpatial, kTokens };

// One level of the feature pyramid. Spatial stages hold [C, H, W] maps;
// token stages hold the [N, D] feature tokens of an encoder layer (quality
// token excluded). Stage 0 is always the raw [0,1] pixels.
struct FeatureStage {
  StageKind kind = StageKind::kSpatial;
  int stage_index = 0;
  Tensor data;

  int64_t ChannelCount() const { return kind == StageKind::kSpatial ? data.dim(0) : data.dim(1); }
};

struct FeaturePyramid {
  std::string backbone_id;
  std::vector<FeatureStage> stages;
};

enum class PoolKind { kMax, kL2 };

// Topology of a VGG-style backbone: five conv blocks with 3x3/pad-1 conv +
// ReLU layers, stride-2 pooling between blocks, one feature tap at the end
// of each block (before the pool).
struct BackboneSpec {
  std::string name;
  std::vector<std::vector<int>> blocks;  // out-channels of each conv in each block
  PoolKind pool = PoolKind::kMax;
  std::array<double, 3> norm_mean{0.5, 0.5, 0.5};
  std::array<double, 3> norm_std{0.5, 0.5, 0.5};

  // Stock 13-conv-layer VGG16 topology with ImageNet normalization.
  static BackboneSpec Vgg16();
  // Desk-scale topology: one conv per block, 8/16/32/64/64 channels.
  static BackboneSpec Tiny();

  int NumBlocks() const { return static_cast<int>(blocks.size()); }
  int DeepestChannels() const { return blocks.back().back(); }

  // Layer names ("conv<block>_<idx>") with their weight/bias shapes, in
  // forward order. This is the schema a weight container must satisfy.
  std::vector<std::pair<std::string, std::vector<int64_t>>> LayerShapes() const;
};

// Frozen feature extractor. Parameters are immutable after construction and
// never participate in gradient computation, so extraction is a pure
// function of (image, weights) and safe to call concurrently.
class Backbone {
 public:
  // Fixed-random weights (He-scaled), reproducible from the seed. This is
  // the hermetic desk-scale backbone used throughout the test suite.
  static Backbone Random(const BackboneSpec& spec, uint64_t seed);

  // Builds from a weight container, validating every layer shape. Throws
  // ValidationError listing expected vs found shapes per layer. An explicit
  // id preserves provenance when rehydrating from a checkpoint.
  static Backbone FromContainer(const TensorContainer& container, const BackboneSpec& spec,
                                const std::string& id_override = "");

  const BackboneSpec& spec() const { return spec_; }
  // Identifies topology, pooling and weight provenance, e.g. "tiny8-max-seed7".
  const std::string& id() const { return id_; }

  // Pixels as stage 0 plus one spatial stage per conv block (stages 1..5).
  FeaturePyramid ExtractFeatures(const ImageTensor& image) const;

  TensorContainer ToContainer() const;

  // Read-only parameter access (freeze verification in tests).
  const std::vector<Tensor>& layer_weights() const { return weights_; }
  const std::vector<Tensor>& layer_biases() const { return biases_; }

 private:
  Backbone(BackboneSpec spec, std::string id) : spec_(std::move(spec)), id_(std::move(id)) {}

  BackboneSpec spec_;
  std::string id_;
  std::vector<Tensor> weights_;  // [out, in, 3, 3] per conv layer, forward order
  std::vector<Tensor> biases_;   // [out]
};

// Reads a weight container from disk and validates it against `spec`.
// Missing file -> IoError; wrong shapes -> ValidationError naming layers.
Backbone LoadBackbone(const std::string& weights_path, const BackboneSpec& spec);

void SaveBackbone(const std::string& weights_path, const Backbone& backbone);

// Pixels as stage 0 plus the five CNN stages.
FeaturePyramid ExtractCnnFeatures(const ImageTensor& image, const Backbone& backbone);

}  // namespace tfiqa

#endif  // TFIQA_BACKBONE_HPP_
