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

#include "tfiqa/container.hpp"

#include <cstring>
#include <fstream>

#include "tfiqa/common.hpp"

namespace tfiqa {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'C', '1'};

void WriteBytes(std::ofstream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void ReadBytes(std::ifstream& is, void* p, size_t n, const std::string& path) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw IoError("container file truncated or corrupt: " + path);
  }
}

template <typename T>
void WritePod(std::ofstream& os, T v) {
  WriteBytes(os, &v, sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& is, const std::string& path) {
  T v;
  ReadBytes(is, &v, sizeof(T), path);
  return v;
}

}  // namespace

const Tensor& TensorContainer::Get(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw IoError("container entry missing: " + name);
  return it->second.tensor;
}

void TensorContainer::PutF64(const std::string& name, Tensor t) {
  entries[name] = ContainerEntry{std::move(t), false};
}

void TensorContainer::PutF32(const std::string& name, Tensor t) {
  entries[name] = ContainerEntry{std::move(t), true};
}

TensorContainer ReadContainer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open container file: " + path);

  char magic[4];
  ReadBytes(is, magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a tensor container: " + path);
  const uint32_t version = ReadPod<uint32_t>(is, path);
  if (version != kContainerVersion) {
    throw IoError("container version mismatch in " + path + ": found " + std::to_string(version) +
                  ", expected " + std::to_string(kContainerVersion));
  }

  TensorContainer c;
  const uint64_t meta_len = ReadPod<uint64_t>(is, path);
  c.metadata_json.resize(meta_len);
  if (meta_len > 0) ReadBytes(is, c.metadata_json.data(), meta_len, path);

  const uint64_t count = ReadPod<uint64_t>(is, path);
  for (uint64_t k = 0; k < count; ++k) {
    const uint64_t name_len = ReadPod<uint64_t>(is, path);
    std::string name(name_len, '\0');
    ReadBytes(is, name.data(), name_len, path);
    const uint8_t dtype = ReadPod<uint8_t>(is, path);
    if (dtype > 1) throw IoError("container has unknown dtype in " + path);
    const uint8_t ndim = ReadPod<uint8_t>(is, path);
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint8_t i = 0; i < ndim; ++i) {
      shape[i] = static_cast<int64_t>(ReadPod<uint64_t>(is, path));
      numel *= shape[i];
    }
    Tensor t(shape);
    if (dtype == 0) {
      std::vector<float> buf(static_cast<size_t>(numel));
      ReadBytes(is, buf.data(), buf.size() * sizeof(float), path);
      for (int64_t i = 0; i < numel; ++i) t[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
    } else {
      ReadBytes(is, t.data(), static_cast<size_t>(numel) * sizeof(double), path);
    }
    c.entries[name] = ContainerEntry{std::move(t), dtype == 0};
  }
  return c;
}

void WriteContainer(const std::string& path, const TensorContainer& container) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write container file: " + path);

  WriteBytes(os, kMagic, 4);
  WritePod<uint32_t>(os, kContainerVersion);
  WritePod<uint64_t>(os, container.metadata_json.size());
  WriteBytes(os, container.metadata_json.data(), container.metadata_json.size());
  WritePod<uint64_t>(os, container.entries.size());
  for (const auto& [name, entry] : container.entries) {
    WritePod<uint64_t>(os, name.size());
    WriteBytes(os, name.data(), name.size());
    WritePod<uint8_t>(os, entry.stored_f32 ? 0 : 1);
    const auto& shape = entry.tensor.shape();
    WritePod<uint8_t>(os, static_cast<uint8_t>(shape.size()));
    for (int64_t d : shape) WritePod<uint64_t>(os, static_cast<uint64_t>(d));
    if (entry.stored_f32) {
      std::vector<float> buf(static_cast<size_t>(entry.tensor.size()));
      for (int64_t i = 0; i < entry.tensor.size(); ++i) {
        buf[static_cast<size_t>(i)] = static_cast<float>(entry.tensor[i]);
      }
      WriteBytes(os, buf.data(), buf.size() * sizeof(float));
    } else {
      WriteBytes(os, entry.tensor.data(), static_cast<size_t>(entry.tensor.size()) * sizeof(double));
    }
  }
  if (!os) throw IoError("write failed for container file: " + path);
}

}  // namespace tfiqa
