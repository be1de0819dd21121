#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msched/diffkernel/tensor.hpp"
#include "msched/errors.hpp"

namespace msched::dk {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

/// Reverse-mode recorder. Every op appends one node holding its forward value and a
/// closure that pushes the node's gradient into its inputs (and into ParamTensor::grad
/// for parameters the op read). Nodes are replayed in reverse on backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value) { return push(std::move(value), nullptr); }

  /// Leaf that copies a parameter's current values; backward accumulates into p.grad().
  Var param(ParamTensor& p) {
    return push(p.values(), [&p](Tape& t, std::size_t self) { p.grad() += t.nodes_[self].grad; });
  }

  Var push(Matrix value, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Matrix{}, std::move(fn)});
    return Var{nodes_.size() - 1};
  }

  const Matrix& value(Var v) const { return node(v).value; }

  /// Gradient of the last backward() w.r.t. this node. Empty before any backward().
  const Matrix& grad(Var v) const { return node(v).grad; }

  /// Accumulator used by backward closures.
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape. The loss must be a 1x1 node.
  /// Node gradients are reset first, so the same recording may be replayed again
  /// after the caller zeroes parameter grads.
  void backward(Var loss) {
    if (nodes_.empty()) throw StateError("backward called on an empty tape (no forward pass recorded)");
    if (!loss.valid() || loss.id >= nodes_.size()) throw StateError("backward called with a variable not on this tape");
    const auto& lv = nodes_[loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward requires a scalar (1x1) loss");
    for (std::size_t i = 0; i <= loss.id; ++i) nodes_[i].grad = Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
  };

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable is not recorded on this tape");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
};

enum class Activation { identity, relu, tanh, sigmoid };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace detail

/// x W^T + b, with x [batch x in], W [out x in], b [out].
inline Var linear(Tape& t, Var x, ParamTensor& w, ParamTensor& b) {
  const Matrix& xv = t.value(x);
  if (xv.cols() != w.values().cols()) {
    throw ShapeError("linear '" + w.name() + "': input width " + std::to_string(xv.cols()) + " != " +
                     std::to_string(w.values().cols()));
  }
  if (b.values().cols() != w.values().rows()) throw ShapeError("linear '" + w.name() + "': bias width mismatch");
  Matrix y = xv * w.values().transpose();
  y.rowwise() += b.values().row(0);
  return t.push(std::move(y), [x, &w, &b](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    w.grad().noalias() += gy.transpose() * tp.value(x);
    b.grad().row(0) += gy.colwise().sum();
    tp.grad_mut(x.id).noalias() += gy * w.values();
  });
}

inline Var activate(Tape& t, Var x, Activation act) {
  if (act == Activation::identity) return x;
  const Matrix& xv = t.value(x);
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const double z = xv.data()[i];
    switch (act) {
      case Activation::relu: y.data()[i] = z > 0 ? z : 0.0; break;
      case Activation::tanh: y.data()[i] = std::tanh(z); break;
      case Activation::sigmoid: y.data()[i] = detail::sigmoid(z); break;
      case Activation::identity: y.data()[i] = z; break;
    }
  }
  return t.push(std::move(y), [x, act](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    const Matrix& yv = tp.value(Var{self});
    const Matrix& xv2 = tp.value(x);
    Matrix& gx = tp.grad_mut(x.id);
    for (Eigen::Index i = 0; i < gy.size(); ++i) {
      double d = 1.0;
      switch (act) {
        case Activation::relu: d = xv2.data()[i] > 0 ? 1.0 : 0.0; break;
        case Activation::tanh: d = 1.0 - yv.data()[i] * yv.data()[i]; break;
        case Activation::sigmoid: d = yv.data()[i] * (1.0 - yv.data()[i]); break;
        case Activation::identity: break;
      }
      gx.data()[i] += gy.data()[i] * d;
    }
  });
}

inline Var add(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "add");
  Matrix y = t.value(a) + t.value(b);
  return t.push(std::move(y), [a, b](Tape& tp, std::size_t self) {
    tp.grad_mut(a.id) += tp.grad(Var{self});
    tp.grad_mut(b.id) += tp.grad(Var{self});
  });
}

inline Var mul(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "mul");
  Matrix y = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(y), [a, b](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    tp.grad_mut(a.id) += gy.cwiseProduct(tp.value(b));
    tp.grad_mut(b.id) += gy.cwiseProduct(tp.value(a));
  });
}

/// Sum of every entry, as a 1x1 node.
inline Var sum_all(Tape& t, Var x) {
  Matrix y(1, 1);
  y(0, 0) = t.value(x).sum();
  return t.push(std::move(y), [x](Tape& tp, std::size_t self) {
    tp.grad_mut(x.id).array() += tp.grad(Var{self})(0, 0);
  });
}

/// Column-wise concatenation of equally tall inputs.
inline Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (auto p : parts) {
    if (t.value(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += t.value(p).cols();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    const auto& v = t.value(p);
    y.middleCols(at, v.cols()) = v;
    at += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(y), [inputs = std::move(inputs)](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    Eigen::Index off = 0;
    for (auto p : inputs) {
      const auto w = tp.value(p).cols();
      tp.grad_mut(p.id) += gy.middleCols(off, w);
      off += w;
    }
  });
}

inline Var slice_cols(Tape& t, Var x, Eigen::Index begin, Eigen::Index count) {
  const auto& xv = t.value(x);
  if (begin < 0 || count <= 0 || begin + count > xv.cols()) throw ShapeError("slice_cols: out of range");
  Matrix y = xv.middleCols(begin, count);
  return t.push(std::move(y), [x, begin, count](Tape& tp, std::size_t self) {
    tp.grad_mut(x.id).middleCols(begin, count) += tp.grad(Var{self});
  });
}

/// Elementwise mean of equally shaped inputs.
inline Var mean_of(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("mean_of: no inputs");
  Matrix y = t.value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::require_same_shape(y, t.value(parts[i]), "mean_of");
    y += t.value(parts[i]);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  y *= inv;
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(y), [inputs = std::move(inputs), inv](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    for (auto p : inputs) tp.grad_mut(p.id) += inv * gy;
  });
}

/// Gathers rows of an embedding table: out[r] = table[ids[r]].
inline Var embedding(Tape& t, ParamTensor& table, std::span<const int> ids) {
  const auto& tv = table.values();
  Matrix y(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows()) {
      throw ShapeError("embedding '" + table.name() + "': id " + std::to_string(ids[r]) + " out of range");
    }
    y.row(static_cast<Eigen::Index>(r)) = tv.row(ids[r]);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return t.push(std::move(y), [&table, rows = std::move(rows)](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    for (std::size_t r = 0; r < rows.size(); ++r) table.grad().row(rows[r]) += gy.row(static_cast<Eigen::Index>(r));
  });
}

/// Row gather from another node: out[r] = src[rows[r]]. Backward scatter-adds.
inline Var take_rows(Tape& t, Var src, std::span<const int> rows) {
  const auto& sv = t.value(src);
  Matrix y(static_cast<Eigen::Index>(rows.size()), sv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= sv.rows()) throw ShapeError("take_rows: row index out of range");
    y.row(static_cast<Eigen::Index>(r)) = sv.row(rows[r]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return t.push(std::move(y), [src, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(Var{self});
    auto& gs = tp.grad_mut(src.id);
    for (std::size_t r = 0; r < idx.size(); ++r) gs.row(idx[r]) += gy.row(static_cast<Eigen::Index>(r));
  });
}

/// Mean squared error over all entries, as a 1x1 node. Target is a constant.
inline Var mse(Tape& t, Var pred, const Matrix& target) {
  detail::require_same_shape(t.value(pred), target, "mse");
  const double n = static_cast<double>(target.size());
  Matrix diff = t.value(pred) - target;
  Matrix y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return t.push(std::move(y), [pred, diff = std::move(diff), n](Tape& tp, std::size_t self) {
    tp.grad_mut(pred.id) += (2.0 * tp.grad(Var{self})(0, 0) / n) * diff;
  });
}

}  // namespace msched::dk
