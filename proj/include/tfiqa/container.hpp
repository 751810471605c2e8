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

#ifndef TFIQA_CONTAINER_HPP_
#define TFIQA_CONTAINER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tfiqa/tensor.hpp"

namespace tfiqa {

// Self-describing named-tensor container ("NTC1"), used for both backbone
// weight files (float32 payload) and training checkpoints (float64 payload,
// bit-exact round trip). Layout, all little-endian:
//
//   magic "NTC1" | u32 version | u64 meta_len | meta (UTF-8 JSON)
//   u64 tensor_count
//   per tensor: u64 name_len | name | u8 dtype (0=f32, 1=f64)
//               u8 ndim | u64 dims[ndim] | payload
//
// Ordering of entries is preserved (sorted by name on write).
struct ContainerEntry {
  Tensor tensor;
  // Storage dtype on disk. Doubles loaded from an f32 entry are exact
  // upcasts, so rewriting as f32 loses nothing.
  bool stored_f32 = false;
};

struct TensorContainer {
  std::string metadata_json = "{}";
  std::map<std::string, ContainerEntry> entries;

  bool Has(const std::string& name) const { return entries.count(name) != 0; }
  const Tensor& Get(const std::string& name) const;
  void PutF64(const std::string& name, Tensor t);
  void PutF32(const std::string& name, Tensor t);
};

// Throws IoError on missing/truncated/corrupt files; the version field is
// checked and mismatches are reported explicitly.
TensorContainer ReadContainer(const std::string& path);
void WriteContainer(const std::string& path, const TensorContainer& container);

inline constexpr uint32_t kContainerVersion = 1;

}  // namespace tfiqa

#endif  // TFIQA_CONTAINER_HPP_
