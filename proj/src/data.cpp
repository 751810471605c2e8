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

#include "tfiqa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double ParseNumber(const std::string& s, int line_no, const std::string& what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("manifest line " + std::to_string(line_no) + ": cannot parse " + what +
                          " from '" + s + "'");
  }
}

// Shortest decimal form that round-trips a double.
std::string FormatDouble(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

void ValidateManifest(const DatasetManifest& m) {
  if (m.scale.lo >= m.scale.hi) {
    throw ValidationError("manifest: mos_lo must be strictly below mos_hi");
  }
  auto check_mos = [&](double mos, const std::string& path) {
    if (mos < m.scale.lo || mos > m.scale.hi) {
      throw ValidationError("manifest: mos " + FormatDouble(mos) + " for '" + path +
                            "' is outside the declared scale [" + FormatDouble(m.scale.lo) + ", " +
                            FormatDouble(m.scale.hi) + "]");
    }
  };
  if (m.kind == ManifestKind::kFr) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : m.fr_records) {
      if (r.ref_path.empty() || r.dist_path.empty()) {
        throw ValidationError("manifest: empty image path");
      }
      check_mos(r.mos, r.dist_path);
      if (!seen.emplace(r.ref_path, r.dist_path).second) {
        throw ValidationError("manifest: duplicate pair (" + r.ref_path + ", " + r.dist_path + ")");
      }
    }
  } else {
    std::set<std::string> seen;
    for (const auto& r : m.nr_records) {
      if (r.image_path.empty()) throw ValidationError("manifest: empty image path");
      check_mos(r.mos, r.image_path);
      if (r.histogram) r.histogram->Validate(1e-4);
      if (!seen.insert(r.image_path).second) {
        throw ValidationError("manifest: duplicate image path " + r.image_path);
      }
    }
  }
}

}  // namespace

std::string DatasetManifest::Resolve(const std::string& rel_path) const {
  std::filesystem::path p(rel_path);
  if (p.is_absolute() || base_dir.empty()) return rel_path;
  return (std::filesystem::path(base_dir) / p).string();
}

DatasetManifest LoadManifest(const std::string& path, ManifestKind kind) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);

  DatasetManifest m;
  m.kind = kind;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  m.name = std::filesystem::path(path).stem().string();

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool nr_has_histogram = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto eq = t.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = Trim(t.substr(1, eq - 1));
      const std::string value = Trim(t.substr(eq + 1));
      if (key == "name") {
        m.name = value;
      } else if (key == "mos_lo") {
        m.scale.lo = ParseNumber(value, line_no, "mos_lo");
      } else if (key == "mos_hi") {
        m.scale.hi = ParseNumber(value, line_no, "mos_hi");
      } else if (key == "higher_is_better") {
        m.scale.higher_is_better = (value == "true" || value == "1");
      }
      continue;
    }
    if (!header_seen) {
      const auto fields = SplitCsvLine(t);
      if (kind == ManifestKind::kFr) {
        const std::vector<std::string> expected{"ref_path", "dist_path", "mos"};
        for (size_t i = 0; i < expected.size(); ++i) {
          if (i >= fields.size() || fields[i] != expected[i]) {
            throw ValidationError("manifest " + path + ": FR header must be "
                                  "'ref_path,dist_path,mos'; missing or wrong column '" +
                                  expected[i] + "'");
          }
        }
      } else {
        const std::vector<std::string> base{"image_path", "mos"};
        for (size_t i = 0; i < base.size(); ++i) {
          if (i >= fields.size() || fields[i] != base[i]) {
            throw ValidationError("manifest " + path + ": NR header must start with "
                                  "'image_path,mos'; missing or wrong column '" + base[i] + "'");
          }
        }
        if (fields.size() > 2) {
          if (fields.size() != 7 || fields[2] != "p1" || fields[3] != "p2" || fields[4] != "p3" ||
              fields[5] != "p4" || fields[6] != "p5") {
            throw ValidationError("manifest " + path +
                                  ": NR histogram header must be 'image_path,mos,p1,p2,p3,p4,p5'");
          }
          nr_has_histogram = true;
        }
      }
      header_seen = true;
      continue;
    }
    const auto fields = SplitCsvLine(t);
    if (kind == ManifestKind::kFr) {
      if (fields.size() != 3) {
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              ": expected 3 fields, got " + std::to_string(fields.size()));
      }
      FrRecord r;
      r.ref_path = fields[0];
      r.dist_path = fields[1];
      r.mos = ParseNumber(fields[2], line_no, "mos");
      m.fr_records.push_back(std::move(r));
    } else {
      const size_t expected = nr_has_histogram ? 7 : 2;
      if (fields.size() != expected) {
        throw ValidationError("manifest line " + std::to_string(line_no) + ": expected " +
                              std::to_string(expected) + " fields, got " +
                              std::to_string(fields.size()));
      }
      NrRecord r;
      r.image_path = fields[0];
      r.mos = ParseNumber(fields[1], line_no, "mos");
      if (nr_has_histogram) {
        QualityDistribution hist;
        hist.probs = Tensor({kNumQualityLevels});
        for (int k = 0; k < kNumQualityLevels; ++k) {
          hist.probs[k] = ParseNumber(fields[static_cast<size_t>(2 + k)], line_no,
                                      "p" + std::to_string(k + 1));
        }
        r.histogram = std::move(hist);
      }
      m.nr_records.push_back(std::move(r));
    }
  }
  if (!header_seen) throw ValidationError("manifest " + path + ": missing header row");
  ValidateManifest(m);
  return m;
}

void WriteManifest(const std::string& path, const DatasetManifest& manifest) {
  ValidateManifest(manifest);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest: " + path);
  os << "# name = " << manifest.name << "\n";
  os << "# mos_lo = " << FormatDouble(manifest.scale.lo) << "\n";
  os << "# mos_hi = " << FormatDouble(manifest.scale.hi) << "\n";
  os << "# higher_is_better = " << (manifest.scale.higher_is_better ? "true" : "false") << "\n";
  if (manifest.kind == ManifestKind::kFr) {
    os << "ref_path,dist_path,mos\n";
    for (const auto& r : manifest.fr_records) {
      os << r.ref_path << "," << r.dist_path << "," << FormatDouble(r.mos) << "\n";
    }
  } else {
    const bool hist = !manifest.nr_records.empty() && manifest.nr_records[0].histogram.has_value();
    os << (hist ? "image_path,mos,p1,p2,p3,p4,p5" : "image_path,mos") << "\n";
    for (const auto& r : manifest.nr_records) {
      if (hist != r.histogram.has_value()) {
        throw ValidationError("manifest: histogram must be present on all records or none");
      }
      os << r.image_path << "," << FormatDouble(r.mos);
      if (r.histogram) {
        for (int k = 0; k < kNumQualityLevels; ++k) os << "," << FormatDouble(r.histogram->probs[k]);
      }
      os << "\n";
    }
  }
  if (!os) throw IoError("write failed for manifest: " + path);
}

std::pair<DatasetManifest, DatasetManifest> SplitManifest(const DatasetManifest& manifest,
                                                          double train_fraction, uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ValidationError("split: train_fraction must be in (0, 1)");
  }
  DatasetManifest train = manifest;
  DatasetManifest test = manifest;
  train.name = manifest.name + "-train";
  test.name = manifest.name + "-test";
  train.fr_records.clear();
  train.nr_records.clear();
  test.fr_records.clear();
  test.nr_records.clear();

  Rng rng = Rng(seed).Stream("split");
  if (manifest.kind == ManifestKind::kNr) {
    const size_t n = manifest.nr_records.size();
    const size_t n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
      throw ValidationError("split: too few records (" + std::to_string(n) +
                            ") to honor fraction " + FormatDouble(train_fraction));
    }
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    rng.Shuffle(idx);
    for (size_t i = 0; i < n; ++i) {
      (i < n_train ? train : test).nr_records.push_back(manifest.nr_records[idx[i]]);
    }
  } else {
    // Content split: group by reference so no reference leaks across sides.
    std::vector<std::string> refs;
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < manifest.fr_records.size(); ++i) {
      const std::string& ref = manifest.fr_records[i].ref_path;
      auto [it, inserted] = groups.try_emplace(ref);
      if (inserted) refs.push_back(ref);
      it->second.push_back(i);
    }
    const size_t g = refs.size();
    const size_t g_train =
        static_cast<size_t>(std::llround(train_fraction * static_cast<double>(g)));
    if (g_train == 0 || g_train >= g) {
      throw ValidationError("split: too few reference groups (" + std::to_string(g) +
                            ") to honor fraction " + FormatDouble(train_fraction));
    }
    rng.Shuffle(refs);
    for (size_t gi = 0; gi < g; ++gi) {
      auto& dst = gi < g_train ? train : test;
      for (size_t i : groups[refs[gi]]) dst.fr_records.push_back(manifest.fr_records[i]);
    }
  }
  return {std::move(train), std::move(test)};
}

double MosToLevel(double mos, const MosScale& scale) {
  if (scale.lo >= scale.hi) throw ValidationError("mos scale: lo must be below hi");
  if (mos < scale.lo || mos > scale.hi) {
    throw ValidationError("mos " + FormatDouble(mos) + " outside scale");
  }
  const double unit = (mos - scale.lo) / (scale.hi - scale.lo);
  return scale.higher_is_better ? 1.0 + 4.0 * unit : 1.0 + 4.0 * (1.0 - unit);
}

double MosToFrLabel(double mos, const MosScale& scale) {
  if (scale.lo >= scale.hi) throw ValidationError("mos scale: lo must be below hi");
  if (mos < scale.lo || mos > scale.hi) {
    throw ValidationError("mos " + FormatDouble(mos) + " outside scale");
  }
  const double unit = (mos - scale.lo) / (scale.hi - scale.lo);
  return scale.higher_is_better ? 1.0 - unit : unit;
}

QualityDistribution MosToDistribution(double mos, const MosScale& scale) {
  const double level = MosToLevel(mos, scale);
  const double sigma = 0.5;
  QualityDistribution dist;
  dist.probs = Tensor({kNumQualityLevels});
  double sum = 0.0;
  for (int k = 0; k < kNumQualityLevels; ++k) {
    const double d = static_cast<double>(k + 1) - level;
    const double w = std::exp(-d * d / (2.0 * sigma * sigma));
    dist.probs[k] = w;
    sum += w;
  }
  for (int k = 0; k < kNumQualityLevels; ++k) dist.probs[k] /= sum;
  return dist;
}

ImageTensor CropPatch(const ImageTensor& image, int64_t y0, int64_t x0, int64_t patch_size) {
  const int64_t h = image.dim(1);
  const int64_t w = image.dim(2);
  if (y0 < 0 || x0 < 0 || y0 + patch_size > h || x0 + patch_size > w) {
    throw ValidationError("patch crop out of bounds");
  }
  ImageTensor out({3, patch_size, patch_size});
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < patch_size; ++y) {
      for (int64_t x = 0; x < patch_size; ++x) out.At(c, y, x) = image.At(c, y0 + y, x0 + x);
    }
  }
  return out;
}

std::vector<ImageTensor> SamplePatches(const ImageTensor& image, int64_t patch_size, int count,
                                       uint64_t seed) {
  ValidateImage(image);
  const int64_t h = image.dim(1);
  const int64_t w = image.dim(2);
  if (h < patch_size || w < patch_size) {
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) +
                          " is smaller than patch size " + std::to_string(patch_size));
  }
  Rng rng = Rng(seed).Stream("patches");
  std::vector<ImageTensor> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int64_t y0 = static_cast<int64_t>(rng.Below(static_cast<uint64_t>(h - patch_size + 1)));
    const int64_t x0 = static_cast<int64_t>(rng.Below(static_cast<uint64_t>(w - patch_size + 1)));
    out.push_back(CropPatch(image, y0, x0, patch_size));
  }
  return out;
}

std::vector<std::pair<int64_t, int64_t>> PatchGrid(int64_t height, int64_t width,
                                                   int64_t patch_size, int grid) {
  if (height < patch_size || width < patch_size) {
    throw ValidationError("image smaller than patch size for grid inference");
  }
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      const int64_t y0 = grid == 1 ? 0 : (height - patch_size) * gy / (grid - 1);
      const int64_t x0 = grid == 1 ? 0 : (width - patch_size) * gx / (grid - 1);
      out.emplace_back(y0, x0);
    }
  }
  return out;
}

}  // namespace tfiqa
