#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msched/diffkernel/tape.hpp"
#include "msched/diffkernel/tensor.hpp"

namespace msched::dk {

/// Fully connected layer: activation(W x + b).
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in, std::size_t out, Activation act)
      : weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}), act_(act) {}

  template <class Rng>
  void init(Rng& rng) {
    weight_.init_uniform(in(), rng);
    bias_.init_uniform(in(), rng);
  }

  std::size_t in() const noexcept { return weight_.shape()[1]; }
  std::size_t out() const noexcept { return weight_.shape()[0]; }
  Activation activation() const noexcept { return act_; }

  ParamTensor& weight() noexcept { return weight_; }
  ParamTensor& bias() noexcept { return bias_; }
  const ParamTensor& weight() const noexcept { return weight_; }
  const ParamTensor& bias() const noexcept { return bias_; }

  /// Records the pre-activation and the activation on the tape.
  Var forward(Tape& t, Var x) { return activate(t, linear(t, x, weight_, bias_), act_); }

  void collect(ParamList& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  ParamTensor weight_;
  ParamTensor bias_;
  Activation act_ = Activation::identity;
};

/// Stack of dense layers; the last layer's activation is set separately.
class Mlp {
 public:
  Mlp() = default;

  /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `last`.
  Mlp(const std::string& name, const std::vector<std::size_t>& widths, Activation hidden, Activation last) {
    if (widths.size() < 2) throw ShapeError("mlp '" + name + "' needs at least an input and an output width");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool is_last = i + 2 == widths.size();
      layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1], is_last ? last : hidden);
    }
  }

  template <class Rng>
  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  Var forward(Tape& t, Var x) {
    for (auto& l : layers_) x = l.forward(t, x);
    return x;
  }

  void collect(ParamList& out) {
    for (auto& l : layers_) l.collect(out);
  }

  std::size_t in() const { return layers_.front().in(); }
  std::size_t out() const { return layers_.back().out(); }
  std::size_t depth() const noexcept { return layers_.size(); }

 private:
  std::vector<DenseLayer> layers_;
};

/// Long short-term memory cell with gates stacked as [input, forget, candidate, output].
///
///   i = sigmoid(Wx_i x + Wh_i h + b_i)      f = sigmoid(...)     o = sigmoid(...)
///   g = tanh(Wx_g x + Wh_g h + b_g)
///   c' = f * c + i * g                      h' = o * tanh(c')
///
/// On the tape the state travels as one [batch x 2H] node laid out as [h | c].
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(const std::string& name, std::size_t input_size, std::size_t hidden_size)
      : w_input_(name + ".w_input", {4 * hidden_size, input_size}),
        w_hidden_(name + ".w_hidden", {4 * hidden_size, hidden_size}),
        bias_(name + ".bias", {4 * hidden_size}),
        input_size_(input_size),
        hidden_size_(hidden_size) {}

  template <class Rng>
  void init(Rng& rng) {
    const auto fan_in = input_size_ + hidden_size_;
    w_input_.init_uniform(fan_in, rng);
    w_hidden_.init_uniform(fan_in, rng);
    bias_.init_uniform(fan_in, rng);
  }

  std::size_t input_size() const noexcept { return input_size_; }
  std::size_t hidden_size() const noexcept { return hidden_size_; }

  ParamTensor& w_input() noexcept { return w_input_; }
  ParamTensor& w_hidden() noexcept { return w_hidden_; }
  ParamTensor& bias() noexcept { return bias_; }

  Var zero_state(Tape& t, std::size_t batch) const {
    return t.constant(Matrix::Zero(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(2 * hidden_size_)));
  }

  Var step(Tape& t, Var x, Var state);

  /// Hidden part of a [h | c] state node.
  Var hidden(Tape& t, Var state) const {
    return slice_cols(t, state, 0, static_cast<Eigen::Index>(hidden_size_));
  }

  void collect(ParamList& out) {
    out.push_back(&w_input_);
    out.push_back(&w_hidden_);
    out.push_back(&bias_);
  }

 private:
  ParamTensor w_input_;
  ParamTensor w_hidden_;
  ParamTensor bias_;
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
};

inline Var RecurrentCell::step(Tape& t, Var x, Var state) {
  const auto H = static_cast<Eigen::Index>(hidden_size_);
  const Matrix& xv = t.value(x);
  const Matrix& sv = t.value(state);
  if (xv.cols() != static_cast<Eigen::Index>(input_size_)) {
    throw ShapeError("recurrent step: input width " + std::to_string(xv.cols()) + " != " + std::to_string(input_size_));
  }
  if (sv.cols() != 2 * H || sv.rows() != xv.rows()) throw ShapeError("recurrent step: state shape mismatch");

  const auto B = xv.rows();
  Matrix gates = xv * w_input_.values().transpose();
  gates.noalias() += sv.leftCols(H) * w_hidden_.values().transpose();
  gates.rowwise() += bias_.values().row(0);
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index k = 0; k < 4 * H; ++k) {
      const bool candidate = k >= 2 * H && k < 3 * H;
      gates(r, k) = candidate ? std::tanh(gates(r, k)) : detail::sigmoid(gates(r, k));
    }
  }
  Matrix next(B, 2 * H);
  Matrix tanh_c(B, H);
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index j = 0; j < H; ++j) {
      const double c = gates(r, H + j) * sv(r, H + j) + gates(r, j) * gates(r, 2 * H + j);
      tanh_c(r, j) = std::tanh(c);
      next(r, H + j) = c;
      next(r, j) = gates(r, 3 * H + j) * tanh_c(r, j);
    }
  }

  return t.push(std::move(next), [this, x, state, gates = std::move(gates), tanh_c = std::move(tanh_c), H](
                                     Tape& tp, std::size_t self) {
    const Matrix& g_next = tp.grad(Var{self});
    const Matrix& prev = tp.value(state);
    const auto rows = g_next.rows();
    Matrix d_pre(rows, 4 * H);
    Matrix d_prev(rows, 2 * H);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index j = 0; j < H; ++j) {
        const double i = gates(r, j), f = gates(r, H + j), g = gates(r, 2 * H + j), o = gates(r, 3 * H + j);
        const double dh = g_next(r, j);
        const double tc = tanh_c(r, j);
        const double dc = g_next(r, H + j) + dh * o * (1.0 - tc * tc);
        d_pre(r, j) = dc * g * i * (1.0 - i);
        d_pre(r, H + j) = dc * prev(r, H + j) * f * (1.0 - f);
        d_pre(r, 2 * H + j) = dc * i * (1.0 - g * g);
        d_pre(r, 3 * H + j) = dh * tc * o * (1.0 - o);
        d_prev(r, H + j) = dc * f;
      }
    }
    w_input_.grad().noalias() += d_pre.transpose() * tp.value(x);
    w_hidden_.grad().noalias() += d_pre.transpose() * prev.leftCols(H);
    bias_.grad().row(0) += d_pre.colwise().sum();
    tp.grad_mut(x.id).noalias() += d_pre * w_input_.values();
    d_prev.leftCols(H).noalias() = d_pre * w_hidden_.values();
    tp.grad_mut(state.id) += d_prev;
  });
}

/// Single-sample convenience wrapper; the tape keeps the cached pre-activation.
inline std::vector<double> dense_forward(DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in()) {
    throw ShapeError("dense_forward: input length " + std::to_string(x.size()) + " != " + std::to_string(layer.in()));
  }
  Tape t;
  Matrix xm(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) xm(0, static_cast<Eigen::Index>(i)) = x[i];
  const auto& y = t.value(layer.forward(t, t.constant(std::move(xm))));
  return {y.data(), y.data() + y.size()};
}

struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;
};

inline RecurrentState recurrent_step(RecurrentCell& cell, std::span<const double> x, std::span<const double> h,
                                     std::span<const double> c) {
  if (x.size() != cell.input_size() || h.size() != cell.hidden_size() || c.size() != cell.hidden_size()) {
    throw ShapeError("recurrent_step: dimensions inconsistent with cell sizes");
  }
  const auto H = static_cast<Eigen::Index>(cell.hidden_size());
  Tape t;
  Matrix xm(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) xm(0, static_cast<Eigen::Index>(i)) = x[i];
  Matrix sm(1, 2 * H);
  for (Eigen::Index j = 0; j < H; ++j) {
    sm(0, j) = h[static_cast<std::size_t>(j)];
    sm(0, H + j) = c[static_cast<std::size_t>(j)];
  }
  const auto& next = t.value(cell.step(t, t.constant(std::move(xm)), t.constant(std::move(sm))));
  RecurrentState out;
  out.h.assign(next.data(), next.data() + H);
  out.c.assign(next.data() + H, next.data() + 2 * H);
  return out;
}

}  // namespace msched::dk
