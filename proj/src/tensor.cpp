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

#include "tfiqa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

namespace {
int64_t NumElements(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ValidationError("tensor dimension must be nonnegative");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(NumElements(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (NumElements(shape_) != static_cast<int64_t>(values.size())) {
    throw ValidationError("tensor value count does not match shape " + ShapeToString(shape_));
  }
  data_ = std::move(values);
}

Tensor Tensor::Full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.Fill(value);
  return t;
}

Tensor Tensor::RandomNormal(std::vector<int64_t> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.Normal(0.0, stddev);
  return t;
}

Tensor Tensor::RandomUniform(std::vector<int64_t> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.Uniform(lo, hi);
  return t;
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::MinValue() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Tensor::MaxValue() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Tensor::Sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Tensor::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::CheckFinite(const char* what) const {
  if (!AllFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

std::string ShapeToString(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace tfiqa
