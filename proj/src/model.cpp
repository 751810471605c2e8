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

#include "tfiqa/model.hpp"

#include <json.hpp>

#include "tfiqa/common.hpp"
#include "tfiqa/data.hpp"

namespace tfiqa {

using nlohmann::json;

std::string TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kFr:
      return "fr";
    case TrainMode::kNr:
      return "nr";
    case TrainMode::kUni:
      return "uni";
  }
  return "?";
}

TrainMode TrainModeFromName(const std::string& name) {
  if (name == "fr") return TrainMode::kFr;
  if (name == "nr") return TrainMode::kNr;
  if (name == "uni") return TrainMode::kUni;
  throw ConfigError("unknown mode '" + name + "' (expected fr, nr or uni)");
}

double ScoreFrImages(const Model& model, const ImageTensor& ref, const ImageTensor& dist) {
  if (!model.SupportsFr()) {
    throw ModeMismatchError("checkpoint was trained for mode '" + TrainModeName(model.mode) +
                            "', which does not support FR scoring");
  }
  FeaturePyramid pyr_r = BuildFullPyramid(ref, *model.backbone, model.encoder);
  FeaturePyramid pyr_d = BuildFullPyramid(dist, *model.backbone, model.encoder);
  return FrScore(pyr_r, pyr_d, model.attention);
}

QualityDistribution ScoreNrDistributionImage(const Model& model, const ImageTensor& image) {
  if (!model.SupportsNr()) {
    throw ModeMismatchError("checkpoint was trained for mode '" + TrainModeName(model.mode) +
                            "', which does not support NR scoring");
  }
  ValidateImage(image);
  const auto origins = PatchGrid(image.dim(1), image.dim(2), model.patch_size);
  Tensor acc({kNumQualityLevels});
  for (const auto& [y0, x0] : origins) {
    ImageTensor patch = CropPatch(image, y0, x0, model.patch_size);
    FeaturePyramid pyr = model.backbone->ExtractFeatures(patch);
    TokenSequence y0_seq = ProjectTokens(pyr.stages.back(), model.encoder);
    std::vector<TokenSequence> layers = Encode(y0_seq, model.encoder);
    Tensor quality_token({model.encoder.config.model_dim});
    for (int64_t j = 0; j < quality_token.size(); ++j) {
      quality_token[j] = layers.back().tokens.At(0, j);
    }
    QualityDistribution dist = Classify(quality_token, model.head);
    for (int k = 0; k < kNumQualityLevels; ++k) acc[k] += dist.probs[k];
  }
  for (int k = 0; k < kNumQualityLevels; ++k) acc[k] /= static_cast<double>(origins.size());
  QualityDistribution out;
  out.probs = std::move(acc);
  return out;
}

double ScoreNrImage(const Model& model, const ImageTensor& image) {
  return NrScore(ScoreNrDistributionImage(model, image));
}

namespace {

BackboneSpec SpecByName(const std::string& name, const std::string& pool) {
  BackboneSpec spec;
  if (name == "vgg16") {
    spec = BackboneSpec::Vgg16();
  } else if (name == "tiny8") {
    spec = BackboneSpec::Tiny();
  } else {
    throw IoError("checkpoint references unknown backbone spec '" + name + "'");
  }
  spec.pool = pool == "l2" ? PoolKind::kL2 : PoolKind::kMax;
  return spec;
}

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  const Model& m = checkpoint.model;
  TensorContainer c;

  json meta;
  meta["kind"] = "checkpoint";
  meta["format_version"] = kCheckpointFormatVersion;
  meta["mode"] = TrainModeName(m.mode);
  meta["epoch"] = checkpoint.epoch;
  meta["config"] = json::parse(checkpoint.config_json);
  meta["metrics"] = checkpoint.metrics;
  meta["patch_size"] = m.patch_size;
  meta["encoder"] = {{"layers", m.encoder.config.num_layers},
                     {"dim", m.encoder.config.model_dim},
                     {"heads", m.encoder.config.num_heads},
                     {"mlp_hidden", m.encoder.config.mlp_hidden},
                     {"dropout", m.encoder.config.dropout_rate},
                     {"max_tokens", m.encoder.config.max_tokens},
                     {"input_channels", m.encoder.config.input_channels}};
  meta["head"] = {{"input_dim", m.head.input_dim},
                  {"hidden_dim", m.head.hidden_dim},
                  {"dropout", m.head.dropout_rate}};
  meta["backbone"] = {{"spec", m.backbone->spec().name},
                      {"pool", m.backbone->spec().pool == PoolKind::kMax ? "max" : "l2"},
                      {"id", m.backbone->id()}};
  if (m.has_nr_calibration) {
    meta["nr_calibration"] = {{"a", m.nr_calibration_a}, {"b", m.nr_calibration_b}};
  }
  c.metadata_json = meta.dump();

  m.encoder.ForEachParam([&](const std::string& name, const Tensor& t) { c.PutF64(name, t); });
  m.attention.ForEachParam([&](const std::string& name, const Tensor& t) { c.PutF64(name, t); });
  m.head.ForEachParam([&](const std::string& name, const Tensor& t) { c.PutF64(name, t); });
  // Backbone weights are float32 at rest (they come from float32 containers
  // or are float32-quantized at init), so f32 storage is lossless here.
  for (const auto& [name, entry] : m.backbone->ToContainer().entries) {
    c.entries["backbone/" + name] = entry;
  }
  WriteContainer(path, c);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  TensorContainer c = ReadContainer(path);
  json meta;
  try {
    meta = json::parse(c.metadata_json);
  } catch (const json::exception&) {
    throw IoError("checkpoint metadata is not valid JSON: " + path);
  }
  if (!meta.contains("kind") || meta["kind"] != "checkpoint") {
    throw IoError("container is not a checkpoint: " + path);
  }
  const uint32_t version = meta.value("format_version", 0u);
  if (version != kCheckpointFormatVersion) {
    throw IoError("checkpoint format version mismatch in " + path + ": found " +
                  std::to_string(version) + ", expected " +
                  std::to_string(kCheckpointFormatVersion));
  }

  Checkpoint ck;
  ck.epoch = meta.value("epoch", 0);
  ck.config_json = meta.value("config", json::object()).dump();
  if (meta.contains("metrics")) {
    for (const auto& [k, v] : meta["metrics"].items()) {
      ck.metrics[k] = v.get<double>();
    }
  }

  Model& m = ck.model;
  m.mode = TrainModeFromName(meta.value("mode", std::string()));
  m.patch_size = meta.value("patch_size", static_cast<int64_t>(224));

  const json& je = meta.at("encoder");
  EncoderConfig ec;
  ec.num_layers = je.at("layers").get<int>();
  ec.model_dim = je.at("dim").get<int>();
  ec.num_heads = je.at("heads").get<int>();
  ec.mlp_hidden = je.at("mlp_hidden").get<int>();
  ec.dropout_rate = je.at("dropout").get<double>();
  ec.max_tokens = je.at("max_tokens").get<int>();
  ec.input_channels = je.at("input_channels").get<int>();
  Rng scratch(0);
  m.encoder = EncoderState::Init(ec, scratch);
  m.encoder.ForEachParam([&](const std::string& name, Tensor& t) {
    const Tensor& stored = c.Get(name);
    if (!stored.SameShape(t)) {
      throw IoError("checkpoint tensor " + name + " has shape " +
                    ShapeToString(stored.shape()) + ", expected " + ShapeToString(t.shape()));
    }
    t = stored;
  });

  const json& jb = meta.at("backbone");
  BackboneSpec spec = SpecByName(jb.at("spec").get<std::string>(), jb.value("pool", "max"));
  TensorContainer bb_container;
  for (const auto& [name, entry] : c.entries) {
    if (name.rfind("backbone/", 0) == 0) bb_container.entries[name.substr(9)] = entry;
  }
  m.backbone = std::make_shared<Backbone>(
      Backbone::FromContainer(bb_container, spec, jb.value("id", std::string())));

  std::vector<int64_t> stage_channels =
      FullStageChannels(spec, ec.num_layers, ec.model_dim);
  m.attention = AttentionWeights::Uniform(stage_channels);
  m.attention.ForEachParam([&](const std::string& name, Tensor& t) {
    const Tensor& stored = c.Get(name);
    if (!stored.SameShape(t)) {
      throw IoError("checkpoint tensor " + name + " has unexpected shape");
    }
    t = stored;
  });

  const json& jh = meta.at("head");
  m.head = NrHeadState::Init(jh.at("input_dim").get<int>(), jh.at("hidden_dim").get<int>(),
                             jh.at("dropout").get<double>(), scratch);
  m.head.ForEachParam([&](const std::string& name, Tensor& t) {
    const Tensor& stored = c.Get(name);
    if (!stored.SameShape(t)) {
      throw IoError("checkpoint tensor " + name + " has unexpected shape");
    }
    t = stored;
  });

  if (meta.contains("nr_calibration")) {
    m.nr_calibration_a = meta["nr_calibration"].at("a").get<double>();
    m.nr_calibration_b = meta["nr_calibration"].at("b").get<double>();
    m.has_nr_calibration = true;
  }
  return ck;
}

}  // namespace tfiqa
