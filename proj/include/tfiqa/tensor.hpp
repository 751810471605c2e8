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

#ifndef TFIQA_TENSOR_HPP_
#define TFIQA_TENSOR_HPP_

#include <cstdint>
#include <vector>

namespace tfiqa {

class Rng;

// Dense row-major double tensor. All model math runs in double; gradient
// verification against central finite differences at step 1e-4 needs the
// extra precision that float32 cannot provide.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> values);

  static Tensor Zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor Full(std::vector<int64_t> shape, double value);
  static Tensor RandomNormal(std::vector<int64_t> shape, Rng& rng, double stddev);
  static Tensor RandomUniform(std::vector<int64_t> shape, Rng& rng, double lo, double hi);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  // 2-D accessors; rows()/cols() require ndim() == 2.
  int64_t rows() const { return shape_[0]; }
  int64_t cols() const { return shape_[1]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& At(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double At(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double& At(int64_t c, int64_t y, int64_t x) {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  double At(int64_t c, int64_t y, int64_t x) const {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  bool AllFinite() const;
  double MinValue() const;
  double MaxValue() const;
  double Sum() const;

  void Fill(double value);

  // Throws ValidationError naming `what` when any value is non-finite.
  void CheckFinite(const char* what) const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

std::string ShapeToString(const std::vector<int64_t>& shape);

}  // namespace tfiqa

#endif  // TFIQA_TENSOR_HPP_
