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

#ifndef TFIQA_AUTODIFF_HPP_
#define TFIQA_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "tfiqa/tensor.hpp"

namespace tfiqa {
class Rng;
}

namespace tfiqa::ad {

// Handle into a Tape node.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over whole tensors. One tape is built per forward
// pass (inference reuses the same graph construction with backward simply
// never invoked, so training and scoring share one numeric code path).
//
// Nodes are appended in topological order; Backward sweeps them in reverse.
// Reductions use fixed left-to-right element order, which is what makes the
// bit-reproducibility contracts (checkpoint probe outputs, seeded training
// curves) hold.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf without gradient tracking (inputs, frozen features, labels).
  Var Constant(Tensor value);
  // Leaf with gradient tracking (learnable parameters).
  Var Param(Tensor value);

  const Tensor& Value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  // Gradient of the last Backward root w.r.t. `v`. Zero tensor if untouched.
  const Tensor& Grad(Var v) const;

  // Reverse sweep from a scalar root (size-1 tensor), seeding with 1.
  void Backward(Var root);

  size_t NodeCount() const { return nodes_.size(); }

  // Elementwise (same shape unless noted).
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Div(Var a, Var b);
  Var Scale(Var a, double c);
  Var AddScalar(Var a, double c);
  Var Relu(Var a);
  Var Sqrt(Var a);

  // Row-vector broadcasts over a [N, D] matrix; v has D elements.
  Var AddRowVec(Var a, Var v);
  Var SubRowVec(Var a, Var v);

  // Matrix ops ([N, K] x [K, M]).
  Var MatMul(Var a, Var b);
  Var Transpose(Var a);

  // Structural ops.
  Var Reshape(Var a, std::vector<int64_t> shape);
  Var SliceRows(Var a, int64_t row0, int64_t nrows);
  Var SliceCols(Var a, int64_t col0, int64_t ncols);
  Var ConcatRows(const std::vector<Var>& parts);
  Var ConcatCols(const std::vector<Var>& parts);

  // Row-wise nonlinearities / reductions.
  Var SoftmaxRows(Var a);
  Var RowCumsum(Var a);  // out[i,j] = sum_{k<=j} a[i,k]
  Var RowSum(Var a);     // [N, D] -> [N, 1]
  Var ColMean(Var a);    // [N, D] -> [1, D]
  Var SumAll(Var a);     // -> [1, 1]
  Var MeanAll(Var a);    // -> [1, 1]

  // a / s with s a [1,1] scalar node.
  Var DivByScalar(Var a, Var s);

  // Post-residual layer normalization, per row over the last dimension.
  // gamma/beta hold D elements.
  Var LayerNorm(Var x, Var gamma, Var beta, double eps);

  // Inverted dropout; draws one mask from `rng` at build time.
  Var Dropout(Var a, double rate, Rng& rng);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  Var Emit(Tensor value, bool needs_grad, std::function<void()> backward);
  bool NeedsGrad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }
  Tensor& GradRef(Var v) { return nodes_[static_cast<size_t>(v.id)].grad; }

  std::vector<Node> nodes_;
};

}  // namespace tfiqa::ad

#endif  // TFIQA_AUTODIFF_HPP_
