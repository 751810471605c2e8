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

#include "tfiqa/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <utility>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa::ad {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMatrix>;
using ECMap = Eigen::Map<const EMatrix>;

void Require(bool cond, const char* msg) {
  if (!cond) throw ValidationError(msg);
}

int64_t Rows2d(const Tensor& t) {
  Require(t.ndim() == 2, "autodiff op expects a 2-D tensor");
  return t.rows();
}

}  // namespace

Var Tape::Emit(Tensor value, bool needs_grad, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::Constant(Tensor value) { return Emit(std::move(value), false, {}); }

Var Tape::Param(Tensor value) { return Emit(std::move(value), true, {}); }

const Tensor& Tape::Grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  if (!n.needs_grad) throw ValidationError("gradient requested for a non-tracked node");
  return n.grad;
}

void Tape::Backward(Var root) {
  Node& r = nodes_[static_cast<size_t>(root.id)];
  Require(r.value.size() == 1, "Backward root must be a scalar");
  Require(r.needs_grad, "Backward root does not depend on any parameter");
  for (int32_t i = 0; i <= root.id; ++i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs_grad) {
      n.grad = Tensor(n.value.shape());
    }
  }
  r.grad[0] = 1.0;
  for (int32_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs_grad && n.backward) n.backward();
  }
}

Var Tape::Add(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  Require(ta.SameShape(tb), "Add: shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, b, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (NeedsGrad(b)) {
        Tensor& gb = GradRef(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    };
  }
  return res;
}

Var Tape::Sub(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  Require(ta.SameShape(tb), "Sub: shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] - tb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, b, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (NeedsGrad(b)) {
        Tensor& gb = GradRef(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  }
  return res;
}

Var Tape::Mul(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  Require(ta.SameShape(tb), "Mul: shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, b, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& va = Value(a);
      const Tensor& vb = Value(b);
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (NeedsGrad(b)) {
        Tensor& gb = GradRef(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
    };
  }
  return res;
}

Var Tape::Div(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  Require(ta.SameShape(tb), "Div: shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] / tb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, b, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& vb = Value(b);
      const Tensor& vo = nodes_[static_cast<size_t>(id)].value;
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
      }
      if (NeedsGrad(b)) {
        Tensor& gb = GradRef(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * vo[i] / vb[i];
      }
    };
  }
  return res;
}

Var Tape::Scale(Var a, double c) {
  const Tensor& ta = Value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * c;
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, c, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    };
  }
  return res;
}

Var Tape::AddScalar(Var a, double c) {
  const Tensor& ta = Value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + c;
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  }
  return res;
}

Var Tape::Relu(Var a) {
  const Tensor& ta = Value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& va = Value(a);
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += va[i] > 0.0 ? g[i] : 0.0;
    };
  }
  return res;
}

Var Tape::Sqrt(Var a) {
  const Tensor& ta = Value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = std::sqrt(ta[i]);
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& vo = nodes_[static_cast<size_t>(id)].value;
      Tensor& ga = GradRef(a);
      // sqrt is not differentiable at 0; use subgradient 0 there.
      for (int64_t i = 0; i < g.size(); ++i) {
        if (vo[i] > 0.0) ga[i] += 0.5 * g[i] / vo[i];
      }
    };
  }
  return res;
}

Var Tape::AddRowVec(Var a, Var v) {
  const Tensor& ta = Value(a);
  const Tensor& tv = Value(v);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Require(tv.size() == d, "AddRowVec: vector length mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) out.At(i, j) = ta.At(i, j) + tv[j];
  bool ng = NeedsGrad(a) || NeedsGrad(v);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, v, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (NeedsGrad(v)) {
        Tensor& gv = GradRef(v);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gv[j] += g.At(i, j);
      }
    };
  }
  return res;
}

Var Tape::SubRowVec(Var a, Var v) {
  const Tensor& ta = Value(a);
  const Tensor& tv = Value(v);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Require(tv.size() == d, "SubRowVec: vector length mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) out.At(i, j) = ta.At(i, j) - tv[j];
  bool ng = NeedsGrad(a) || NeedsGrad(v);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, v, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (NeedsGrad(v)) {
        Tensor& gv = GradRef(v);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gv[j] -= g.At(i, j);
      }
    };
  }
  return res;
}

Var Tape::MatMul(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  Require(ta.ndim() == 2 && tb.ndim() == 2, "MatMul: operands must be 2-D");
  Require(ta.cols() == tb.rows(), "MatMul: inner dimension mismatch");
  Tensor out({ta.rows(), tb.cols()});
  {
    ECMap ma(ta.data(), ta.rows(), ta.cols());
    ECMap mb(tb.data(), tb.rows(), tb.cols());
    EMap mo(out.data(), out.rows(), out.cols());
    mo.noalias() = ma * mb;
  }
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, b, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& va = Value(a);
      const Tensor& vb = Value(b);
      ECMap mg(g.data(), g.rows(), g.cols());
      ECMap ma(va.data(), va.rows(), va.cols());
      ECMap mb(vb.data(), vb.rows(), vb.cols());
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        EMap mga(ga.data(), ga.rows(), ga.cols());
        mga.noalias() += mg * mb.transpose();
      }
      if (NeedsGrad(b)) {
        Tensor& gb = GradRef(b);
        EMap mgb(gb.data(), gb.rows(), gb.cols());
        mgb.noalias() += ma.transpose() * mg;
      }
    };
  }
  return res;
}

Var Tape::Transpose(Var a) {
  const Tensor& ta = Value(a);
  Require(ta.ndim() == 2, "Transpose: operand must be 2-D");
  Tensor out({ta.cols(), ta.rows()});
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) out.At(j, i) = ta.At(i, j);
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t j = 0; j < g.cols(); ++j) ga.At(j, i) += g.At(i, j);
    };
  }
  return res;
}

Var Tape::Reshape(Var a, std::vector<int64_t> shape) {
  const Tensor& ta = Value(a);
  Tensor out(std::move(shape), ta.vec());
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  }
  return res;
}

Var Tape::SliceRows(Var a, int64_t row0, int64_t nrows) {
  const Tensor& ta = Value(a);
  const int64_t d = ta.cols();
  Require(ta.ndim() == 2 && row0 >= 0 && row0 + nrows <= ta.rows(), "SliceRows: out of range");
  Tensor out({nrows, d});
  for (int64_t i = 0; i < nrows; ++i)
    for (int64_t j = 0; j < d; ++j) out.At(i, j) = ta.At(row0 + i, j);
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, row0, nrows, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < nrows; ++i)
        for (int64_t j = 0; j < d; ++j) ga.At(row0 + i, j) += g.At(i, j);
    };
  }
  return res;
}

Var Tape::SliceCols(Var a, int64_t col0, int64_t ncols) {
  const Tensor& ta = Value(a);
  Require(ta.ndim() == 2 && col0 >= 0 && col0 + ncols <= ta.cols(), "SliceCols: out of range");
  const int64_t n = ta.rows();
  Tensor out({n, ncols});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < ncols; ++j) out.At(i, j) = ta.At(i, col0 + j);
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, col0, ncols, n, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < ncols; ++j) ga.At(i, col0 + j) += g.At(i, j);
    };
  }
  return res;
}

Var Tape::ConcatRows(const std::vector<Var>& parts) {
  Require(!parts.empty(), "ConcatRows: no operands");
  const int64_t d = Value(parts[0]).cols();
  int64_t total = 0;
  bool ng = false;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    Require(t.ndim() == 2 && t.cols() == d, "ConcatRows: column mismatch");
    total += t.rows();
    ng = ng || NeedsGrad(p);
  }
  Tensor out({total, d});
  int64_t r = 0;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    for (int64_t i = 0; i < t.rows(); ++i)
      for (int64_t j = 0; j < d; ++j) out.At(r + i, j) = t.At(i, j);
    r += t.rows();
  }
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, parts, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      int64_t r0 = 0;
      for (Var p : parts) {
        const int64_t nr = Value(p).rows();
        if (NeedsGrad(p)) {
          Tensor& gp = GradRef(p);
          for (int64_t i = 0; i < nr; ++i)
            for (int64_t j = 0; j < d; ++j) gp.At(i, j) += g.At(r0 + i, j);
        }
        r0 += nr;
      }
    };
  }
  return res;
}

Var Tape::ConcatCols(const std::vector<Var>& parts) {
  Require(!parts.empty(), "ConcatCols: no operands");
  const int64_t n = Value(parts[0]).rows();
  int64_t total = 0;
  bool ng = false;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    Require(t.ndim() == 2 && t.rows() == n, "ConcatCols: row mismatch");
    total += t.cols();
    ng = ng || NeedsGrad(p);
  }
  Tensor out({n, total});
  int64_t c = 0;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < t.cols(); ++j) out.At(i, c + j) = t.At(i, j);
    c += t.cols();
  }
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, parts, n, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      int64_t c0 = 0;
      for (Var p : parts) {
        const int64_t nc = Value(p).cols();
        if (NeedsGrad(p)) {
          Tensor& gp = GradRef(p);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < nc; ++j) gp.At(i, j) += g.At(i, c0 + j);
        }
        c0 += nc;
      }
    };
  }
  return res;
}

Var Tape::SoftmaxRows(Var a) {
  const Tensor& ta = Value(a);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Tensor out(ta.shape());
  for (int64_t i = 0; i < n; ++i) {
    double mx = ta.At(i, 0);
    for (int64_t j = 1; j < d; ++j) mx = std::max(mx, ta.At(i, j));
    double sum = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double e = std::exp(ta.At(i, j) - mx);
      out.At(i, j) = e;
      sum += e;
    }
    for (int64_t j = 0; j < d; ++j) out.At(i, j) /= sum;
  }
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& y = nodes_[static_cast<size_t>(id)].value;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < d; ++j) dot += g.At(i, j) * y.At(i, j);
        for (int64_t j = 0; j < d; ++j) ga.At(i, j) += y.At(i, j) * (g.At(i, j) - dot);
      }
    };
  }
  return res;
}

Var Tape::RowCumsum(Var a) {
  const Tensor& ta = Value(a);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Tensor out(ta.shape());
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      acc += ta.At(i, j);
      out.At(i, j) = acc;
    }
  }
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = d - 1; j >= 0; --j) {
          acc += g.At(i, j);
          ga.At(i, j) += acc;
        }
      }
    };
  }
  return res;
}

Var Tape::RowSum(Var a) {
  const Tensor& ta = Value(a);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Tensor out({n, 1});
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += ta.At(i, j);
    out.At(i, 0) = s;
  }
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) ga.At(i, j) += g.At(i, 0);
    };
  }
  return res;
}

Var Tape::ColMean(Var a) {
  const Tensor& ta = Value(a);
  const int64_t n = Rows2d(ta);
  const int64_t d = ta.cols();
  Tensor out({1, d});
  for (int64_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += ta.At(i, j);
    out.At(0, j) = s / static_cast<double>(n);
  }
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, n, d, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      const double inv = 1.0 / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) ga.At(i, j) += g.At(0, j) * inv;
    };
  }
  return res;
}

Var Tape::SumAll(Var a) {
  const Tensor& ta = Value(a);
  Tensor out({1, 1});
  out[0] = ta.Sum();
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, id = res.id]() {
      const double g = nodes_[static_cast<size_t>(id)].grad[0];
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
  }
  return res;
}

Var Tape::MeanAll(Var a) {
  const Tensor& ta = Value(a);
  const double inv = 1.0 / static_cast<double>(ta.size());
  Tensor out({1, 1});
  out[0] = ta.Sum() * inv;
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, inv, id = res.id]() {
      const double g = nodes_[static_cast<size_t>(id)].grad[0] * inv;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
  }
  return res;
}

Var Tape::DivByScalar(Var a, Var s) {
  const Tensor& ta = Value(a);
  const Tensor& ts = Value(s);
  Require(ts.size() == 1, "DivByScalar: divisor must be a scalar node");
  const double sv = ts[0];
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] / sv;
  bool ng = NeedsGrad(a) || NeedsGrad(s);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, s, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& vo = nodes_[static_cast<size_t>(id)].value;
      const double sv = Value(s)[0];
      if (NeedsGrad(a)) {
        Tensor& ga = GradRef(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sv;
      }
      if (NeedsGrad(s)) {
        double acc = 0.0;
        for (int64_t i = 0; i < g.size(); ++i) acc += g[i] * vo[i];
        GradRef(s)[0] -= acc / sv;
      }
    };
  }
  return res;
}

Var Tape::LayerNorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = Value(x);
  const int64_t n = Rows2d(tx);
  const int64_t d = tx.cols();
  Require(Value(gamma).size() == d && Value(beta).size() == d,
          "LayerNorm: affine parameter length mismatch");
  Tensor out(tx.shape());
  // Cache normalized activations and inverse stddevs for the backward pass.
  auto xhat = std::make_shared<Tensor>(tx.shape());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  const Tensor& g0 = Value(gamma);
  const Tensor& b0 = Value(beta);
  for (int64_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += tx.At(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = tx.At(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(i)] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (tx.At(i, j) - mean) * inv;
      xhat->At(i, j) = xh;
      out.At(i, j) = g0[j] * xh + b0[j];
    }
  }
  bool ng = NeedsGrad(x) || NeedsGrad(gamma) || NeedsGrad(beta);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, x, gamma, beta, n, d, xhat, inv_std, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor& gm = Value(gamma);
      if (NeedsGrad(beta)) {
        Tensor& gb = GradRef(beta);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gb[j] += g.At(i, j);
      }
      if (NeedsGrad(gamma)) {
        Tensor& gg = GradRef(gamma);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) gg[j] += g.At(i, j) * xhat->At(i, j);
      }
      if (NeedsGrad(x)) {
        Tensor& gx = GradRef(x);
        for (int64_t i = 0; i < n; ++i) {
          double mean_h = 0.0;
          double mean_hx = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double h = g.At(i, j) * gm[j];
            mean_h += h;
            mean_hx += h * xhat->At(i, j);
          }
          mean_h /= static_cast<double>(d);
          mean_hx /= static_cast<double>(d);
          const double inv = (*inv_std)[static_cast<size_t>(i)];
          for (int64_t j = 0; j < d; ++j) {
            const double h = g.At(i, j) * gm[j];
            gx.At(i, j) += inv * (h - mean_h - xhat->At(i, j) * mean_hx);
          }
        }
      }
    };
  }
  return res;
}

Var Tape::Dropout(Var a, double rate, Rng& rng) {
  Require(rate >= 0.0 && rate < 1.0, "Dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  const Tensor& ta = Value(a);
  auto mask = std::make_shared<Tensor>(ta.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) {
    const double m = rng.Uniform() < rate ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] = ta[i] * m;
  }
  bool ng = NeedsGrad(a);
  Var res = Emit(std::move(out), ng, {});
  if (ng) {
    nodes_.back().backward = [this, a, mask, id = res.id]() {
      const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
      Tensor& ga = GradRef(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
    };
  }
  return res;
}

}  // namespace tfiqa::ad
