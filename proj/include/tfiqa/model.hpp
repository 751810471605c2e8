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

#ifndef TFIQA_MODEL_HPP_
#define TFIQA_MODEL_HPP_

#include <map>
#include <memory>
#include <string>

#include "tfiqa/backbone.hpp"
#include "tfiqa/encoder.hpp"
#include "tfiqa/fr_metric.hpp"
#include "tfiqa/image.hpp"
#include "tfiqa/nr_head.hpp"

namespace tfiqa {

enum class TrainMode { kFr, kNr, kUni };

std::string TrainModeName(TrainMode mode);
TrainMode TrainModeFromName(const std::string& name);

// Full model bundle. The backbone is frozen and shared; encoder, attention
// weights and head are the learnable parts.
struct Model {
  std::shared_ptr<const Backbone> backbone;
  EncoderState encoder;
  AttentionWeights attention;
  NrHeadState head;
  TrainMode mode = TrainMode::kNr;
  int64_t patch_size = 224;  // NR training/inference patch side

  // Affine map from the [1,5] NR score onto the training dataset's MOS
  // scale: mos_pred = a * score + b. Fitted on the training split.
  double nr_calibration_a = 0.0;
  double nr_calibration_b = 0.0;
  bool has_nr_calibration = false;

  bool SupportsFr() const { return mode == TrainMode::kFr || mode == TrainMode::kUni; }
  bool SupportsNr() const { return mode == TrainMode::kNr || mode == TrainMode::kUni; }
};

struct Checkpoint {
  Model model;
  int epoch = 0;
  std::map<std::string, double> metrics;  // snapshot at selection time
  std::string config_json = "{}";         // training configuration record
};

inline constexpr uint32_t kCheckpointFormatVersion = 1;

// Throws ModeMismatchError if the checkpoint was not trained for the branch.
double ScoreFrImages(const Model& model, const ImageTensor& ref, const ImageTensor& dist);

// Average five-level distribution over a deterministic 3x3 patch grid.
QualityDistribution ScoreNrDistributionImage(const Model& model, const ImageTensor& image);
double ScoreNrImage(const Model& model, const ImageTensor& image);

// Bit-exact parameter round trip; version and truncation checked on load.
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace tfiqa

#endif  // TFIQA_MODEL_HPP_
