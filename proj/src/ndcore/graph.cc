// Copyright 2026 The Gradleak Authors
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

#include "gradleak/ndcore/graph.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::ndcore {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

ConstMap AsMatrix(const Tensor& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutableMap AsMatrix(Tensor& t) {
  return MutableMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

Graph& SameGraph(Var a, Var b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
  return *a.graph();
}

Graph& GraphOf(Var a) {
  if (a.graph() == nullptr) throw ContractError("uninitialized Var");
  return *a.graph();
}

void RequireRank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects rank-2 input, got " +
                         ShapeToString(t.shape()));
  }
}

bool IsRowBroadcast(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rows() > 1;
}

void CheckBinaryShapes(const Tensor& a, const Tensor& b, const char* op,
                       bool allow_broadcast) {
  RequireRank2(a, op);
  RequireRank2(b, op);
  if (a.shape() == b.shape()) return;
  if (allow_broadcast && IsRowBroadcast(a, b)) return;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       ShapeToString(a.shape()) + " and " +
                       ShapeToString(b.shape()));
}

// Elementwise unary op. `derivative(x, y)` is dy/dx given input x, output y.
template <typename Fn, typename Deriv>
Var Unary(Var a, const char* op, Fn fn, Deriv derivative) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  const std::size_t n = x.size();
  {
    const double* __restrict xs = x.values().data();
    double* __restrict ys = y.values().data();
    for (std::size_t i = 0; i < n; ++i) ys[i] = fn(xs[i]);
  }
  const std::size_t in = a.id();
  return g.Record(op, std::move(y), {in},
                  [in, n, derivative](Graph& graph, std::size_t self) {
                    const double* __restrict xs =
                        graph.node_value(in).values().data();
                    const double* __restrict ys =
                        graph.node_value(self).values().data();
                    const double* __restrict dy =
                        graph.node_grad(self).values().data();
                    double* __restrict dx =
                        graph.grad_buffer(in).values().data();
                    for (std::size_t i = 0; i < n; ++i) {
                      dx[i] += dy[i] * derivative(xs[i], ys[i]);
                    }
                  });
}

}  // namespace

const Tensor& Var::value() const {
  if (graph_ == nullptr) throw ContractError("uninitialized Var");
  return graph_->value(*this);
}

Var Graph::Leaf(Tensor value) {
  Var v = Record("leaf", std::move(value), {}, nullptr);
  nodes_[v.id()].requires_grad = true;
  return v;
}

Var Graph::Constant(Tensor value) {
  return Record("constant", std::move(value), {}, nullptr);
}

Var Graph::Record(const char* op, Tensor value,
                  std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericError(std::string(op) + " produced non-finite values");
  }
  bool requires_grad = false;
  for (std::size_t in : inputs) requires_grad |= nodes_[in].requires_grad;
  Node node{op, std::move(value), Tensor(), std::move(inputs),
            requires_grad ? std::move(backward) : nullptr, requires_grad};
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Graph::Backward(Var output) {
  if (output.graph() != this) {
    throw ContractError("Backward() output belongs to another graph");
  }
  if (nodes_[output.id()].value.size() != 1) {
    throw ContractError("Backward() needs a scalar output, got shape " +
                        ShapeToString(nodes_[output.id()].value.shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor();
  grad_buffer(output.id())[0] = 1.0;
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

Var MatMul(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireRank2(av, "MatMul");
  RequireRank2(bv, "MatMul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("MatMul: inner dimensions differ, " +
                         ShapeToString(av.shape()) + " x " +
                         ShapeToString(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return g.Record("matmul", std::move(out), {ia, ib},
                  [ia, ib](Graph& graph, std::size_t self) {
                    const Tensor& dc = graph.node_grad(self);
                    if (graph.node_requires_grad(ia)) {
                      AsMatrix(graph.grad_buffer(ia)).noalias() +=
                          AsMatrix(dc) *
                          AsMatrix(graph.node_value(ib)).transpose();
                    }
                    if (graph.node_requires_grad(ib)) {
                      AsMatrix(graph.grad_buffer(ib)).noalias() +=
                          AsMatrix(graph.node_value(ia)).transpose() *
                          AsMatrix(dc);
                    }
                  });
}

namespace {

Var AddOrSub(Var a, Var b, double sign, const char* op) {
  Graph& g = SameGraph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  CheckBinaryShapes(av, bv, op, /*allow_broadcast=*/true);
  const bool broadcast = av.shape() != bv.shape();
  Tensor out = av;
  if (broadcast) {
    AsMatrix(out).rowwise() += sign * AsMatrix(bv).row(0);
  } else {
    AsMatrix(out) += sign * AsMatrix(bv);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.Record(op, std::move(out), {ia, ib},
                  [ia, ib, sign, broadcast](Graph& graph, std::size_t self) {
                    const Tensor& dc = graph.node_grad(self);
                    if (graph.node_requires_grad(ia)) {
                      AsMatrix(graph.grad_buffer(ia)) += AsMatrix(dc);
                    }
                    if (graph.node_requires_grad(ib)) {
                      if (broadcast) {
                        // Fixed summation order: Eigen's column reductions
                        // depend on buffer alignment.
                        Tensor& db = graph.grad_buffer(ib);
                        const std::size_t cols = db.size();
                        double* __restrict out = db.values().data();
                        for (std::size_t r = 0; r < dc.rows(); ++r) {
                          const double* __restrict row =
                              dc.values().data() + r * cols;
                          for (std::size_t c = 0; c < cols; ++c) {
                            out[c] += sign * row[c];
                          }
                        }
                      } else {
                        AsMatrix(graph.grad_buffer(ib)) += sign * AsMatrix(dc);
                      }
                    }
                  });
}

}  // namespace

Var Add(Var a, Var b) { return AddOrSub(a, b, 1.0, "add"); }

Var Sub(Var a, Var b) { return AddOrSub(a, b, -1.0, "sub"); }

Var Mul(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  CheckBinaryShapes(av, bv, "Mul", /*allow_broadcast=*/false);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.Record("mul", std::move(out), {ia, ib},
                  [ia, ib](Graph& graph, std::size_t self) {
                    const Tensor& dc = graph.node_grad(self);
                    if (graph.node_requires_grad(ia)) {
                      const Tensor& bv = graph.node_value(ib);
                      Tensor& da = graph.grad_buffer(ia);
                      for (std::size_t i = 0; i < dc.size(); ++i) {
                        da[i] += dc[i] * bv[i];
                      }
                    }
                    if (graph.node_requires_grad(ib)) {
                      const Tensor& av = graph.node_value(ia);
                      Tensor& db = graph.grad_buffer(ib);
                      for (std::size_t i = 0; i < dc.size(); ++i) {
                        db[i] += dc[i] * av[i];
                      }
                    }
                  });
}

Var Scale(Var a, double factor) {
  return Unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var Sigmoid(Var a) {
  return Unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Relu(Var a) {
  return Unary(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var Tanh(Var a) {
  return Unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Exp(Var a) {
  return Unary(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Log(Var a) {
  return Unary(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var Square(Var a) {
  return Unary(
      a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var Softplus(Var a) {
  return Unary(
      a, "softplus",
      [](double x) {
        return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Var Step(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? 1.0 : 0.0;
  return g.Constant(std::move(y));
}

Var Sum(Var a) {
  Graph& g = GraphOf(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t in = a.id();
  return g.Record("sum", Tensor::Scalar(total), {in},
                  [in](Graph& graph, std::size_t self) {
                    const double d = graph.node_grad(self)[0];
                    Tensor& dx = graph.grad_buffer(in);
                    for (double& v : dx.values()) v += d;
                  });
}

Var Mean(Var a) {
  return Scale(Sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var ColSum(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "ColSum");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out({1, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += x(r, c);
  }
  const std::size_t in = a.id();
  return g.Record("colsum", std::move(out), {in},
                  [in, rows, cols](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < cols; ++c) dx(r, c) += d[c];
                    }
                  });
}

Var RowSum(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "RowSum");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += x(r, c);
  }
  const std::size_t in = a.id();
  return g.Record("rowsum", std::move(out), {in},
                  [in, rows, cols](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < cols; ++c) dx(r, c) += d[r];
                    }
                  });
}

Var Transpose(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "Transpose");
  Tensor out({x.cols(), x.rows()});
  AsMatrix(out) = AsMatrix(x).transpose();
  const std::size_t in = a.id();
  return g.Record("transpose", std::move(out), {in},
                  [in](Graph& graph, std::size_t self) {
                    AsMatrix(graph.grad_buffer(in)) +=
                        AsMatrix(graph.node_grad(self)).transpose();
                  });
}

Var Reshape(Var a, Shape shape) {
  Graph& g = GraphOf(a);
  Tensor out = a.value().Reshaped(std::move(shape));
  const std::size_t in = a.id();
  return g.Record("reshape", std::move(out), {in},
                  [in](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
                  });
}

Var RepeatRows(Var a, std::size_t times) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "RepeatRows");
  if (times == 0) throw ContractError("RepeatRows needs times >= 1");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out({rows * times, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(x.values().begin() + r * cols, cols,
                  out.values().begin() + (r * times + t) * cols);
    }
  }
  const std::size_t in = a.id();
  return g.Record("repeat_rows", std::move(out), {in},
                  [in, rows, cols, times](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t t = 0; t < times; ++t) {
                        for (std::size_t c = 0; c < cols; ++c) {
                          dx(r, c) += d(r * times + t, c);
                        }
                      }
                    }
                  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("ConcatCols needs at least one part");
  Graph& g = GraphOf(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (Var p : parts) {
    SameGraph(parts[0], p);
    if (p.value().rows() != rows) {
      throw DimensionError("ConcatCols: row counts differ (" +
                           std::to_string(rows) + " vs " +
                           std::to_string(p.value().rows()) + ")");
    }
    widths.push_back(p.value().cols());
    ids.push_back(p.id());
    total += widths.back();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.values().begin() + r * widths[k], widths[k],
                  out.values().begin() + r * total + offset);
    }
    offset += widths[k];
  }
  return g.Record(
      "concat_cols", std::move(out), ids,
      [ids, widths, rows, total](Graph& graph, std::size_t self) {
        const Tensor& d = graph.node_grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (graph.node_requires_grad(ids[k])) {
            Tensor& dx = graph.grad_buffer(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[k]; ++c) {
                dx(r, c) += d[r * total + offset + c];
              }
            }
          }
          offset += widths[k];
        }
      });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("ConcatRows needs at least one part");
  Graph& g = GraphOf(parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> ids;
  std::vector<double> data;
  std::size_t rows = 0;
  for (Var p : parts) {
    SameGraph(parts[0], p);
    if (p.value().cols() != cols) {
      throw DimensionError("ConcatRows: column counts differ (" +
                           std::to_string(cols) + " vs " +
                           std::to_string(p.value().cols()) + ")");
    }
    rows += p.value().rows();
    sizes.push_back(p.value().size());
    ids.push_back(p.id());
    data.insert(data.end(), p.value().values().begin(),
                p.value().values().end());
  }
  return g.Record("concat_rows", Tensor({rows, cols}, std::move(data)), ids,
                  [ids, sizes](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (graph.node_requires_grad(ids[k])) {
                        Tensor& dx = graph.grad_buffer(ids[k]);
                        for (std::size_t i = 0; i < sizes[k]; ++i) {
                          dx[i] += d[offset + i];
                        }
                      }
                      offset += sizes[k];
                    }
                  });
}

Var SliceRows(Var a, std::size_t begin, std::size_t count) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "SliceRows");
  if (count < 1 || begin + count > x.rows()) {
    throw DimensionError("SliceRows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " +
                         ShapeToString(x.shape()));
  }
  const std::size_t cols = x.cols();
  const auto first = x.values().begin() + begin * cols;
  Tensor out({count, cols}, std::vector<double>(first, first + count * cols));
  const std::size_t in = a.id(), offset = begin * cols;
  return g.Record("slice_rows", std::move(out), {in},
                  [in, offset](Graph& graph, std::size_t self) {
                    const Tensor& d = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t i = 0; i < d.size(); ++i) {
                      dx[offset + i] += d[i];
                    }
                  });
}

Var SoftmaxRows(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  RequireRank2(x, "SoftmaxRows");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double top = x(r, 0);
    for (std::size_t c = 1; c < cols; ++c) top = std::max(top, x(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(x(r, c) - top);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= total;
  }
  const std::size_t in = a.id();
  return g.Record("softmax_rows", std::move(out), {in},
                  [in, rows, cols](Graph& graph, std::size_t self) {
                    const Tensor& y = graph.node_value(self);
                    const Tensor& dy = graph.node_grad(self);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) {
                        dot += dy(r, c) * y(r, c);
                      }
                      for (std::size_t c = 0; c < cols; ++c) {
                        dx(r, c) += y(r, c) * (dy(r, c) - dot);
                      }
                    }
                  });
}

Var LogMeanExp(Var a) {
  Graph& g = GraphOf(a);
  const Tensor& x = a.value();
  double top = x[0];
  for (double v : x.values()) top = std::max(top, v);
  double total = 0.0;
  for (double v : x.values()) total += std::exp(v - top);
  const double n = static_cast<double>(x.size());
  const double result = top + std::log(total / n);
  const std::size_t in = a.id();
  return g.Record("log_mean_exp", Tensor::Scalar(result), {in},
                  [in, n](Graph& graph, std::size_t self) {
                    const double out = graph.node_value(self)[0];
                    const double d = graph.node_grad(self)[0];
                    const Tensor& x = graph.node_value(in);
                    Tensor& dx = graph.grad_buffer(in);
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      dx[i] += d * std::exp(x[i] - out) / n;
                    }
                  });
}

}  // namespace gradleak::ndcore
