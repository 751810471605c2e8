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

#ifndef TFIQA_DATA_HPP_
#define TFIQA_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tfiqa/image.hpp"
#include "tfiqa/nr_head.hpp"
#include "tfiqa/tensor.hpp"

namespace tfiqa {

// MOS scale of a dataset. higher_is_better=false marks DMOS-style labels
// where larger values mean worse quality.
struct MosScale {
  double lo = 0.0;
  double hi = 1.0;
  bool higher_is_better = true;
};

struct FrRecord {
  std::string ref_path;
  std::string dist_path;
  double mos = 0.0;
};

struct NrRecord {
  std::string image_path;
  double mos = 0.0;
  std::optional<QualityDistribution> histogram;
};

enum class ManifestKind { kFr, kNr };

// CSV manifest. Metadata rides as leading comment lines:
//   # name = <dataset name>
//   # mos_lo = <lo>   # mos_hi = <hi>   # higher_is_better = true|false
// FR header: ref_path,dist_path,mos
// NR header: image_path,mos  or  image_path,mos,p1,p2,p3,p4,p5
// Paths are relative to the manifest location.
struct DatasetManifest {
  ManifestKind kind = ManifestKind::kNr;
  std::string name;
  MosScale scale;
  std::vector<FrRecord> fr_records;
  std::vector<NrRecord> nr_records;
  std::string base_dir;  // directory the manifest was loaded from

  size_t size() const {
    return kind == ManifestKind::kFr ? fr_records.size() : nr_records.size();
  }
  // Joins a record path with base_dir unless it is absolute.
  std::string Resolve(const std::string& rel_path) const;
};

DatasetManifest LoadManifest(const std::string& path, ManifestKind kind);
void WriteManifest(const std::string& path, const DatasetManifest& manifest);

// Deterministic 80/20-style split. FR manifests split by reference content:
// all distortions of one reference land on the same side.
std::pair<DatasetManifest, DatasetManifest> SplitManifest(const DatasetManifest& manifest,
                                                          double train_fraction, uint64_t seed);

// Affine map of a MOS value onto the level axis [1, 5], inverting polarity
// for DMOS-style scales so 5 is always best quality.
double MosToLevel(double mos, const MosScale& scale);

// Degree-of-distortion target for the FR branch in [0, 1]; 0 means pristine.
double MosToFrLabel(double mos, const MosScale& scale);

// Gaussian soft-binning (sigma = 0.5) of the [1,5]-mapped MOS over the five
// level centers, renormalized. Used when a record has no rating histogram.
QualityDistribution MosToDistribution(double mos, const MosScale& scale);

// `count` uniformly random square crops; deterministic under seed. Throws
// ValidationError if the image is smaller than the patch (callers that want
// padding must pad first).
std::vector<ImageTensor> SamplePatches(const ImageTensor& image, int64_t patch_size, int count,
                                       uint64_t seed);

// Deterministic grid x grid tiling of patch origins for full-image NR
// inference (corners included, evenly spaced).
std::vector<std::pair<int64_t, int64_t>> PatchGrid(int64_t height, int64_t width,
                                                   int64_t patch_size, int grid = 3);

ImageTensor CropPatch(const ImageTensor& image, int64_t y0, int64_t x0, int64_t patch_size);

}  // namespace tfiqa

#endif  // TFIQA_DATA_HPP_
