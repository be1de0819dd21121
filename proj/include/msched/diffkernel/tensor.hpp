#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msched/errors.hpp"

namespace msched::dk {

/// Row-major dense matrix. Batches are laid out one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A learnable weight with its gradient accumulator.
///
/// Rank-1 tensors are stored as a single row so a bias broadcasts across batch rows;
/// rank-2 tensors are [rows x cols]. Higher ranks are not needed by any layer here.
class ParamTensor {
 public:
  ParamTensor() = default;

  ParamTensor(std::string name, std::vector<std::size_t> shape) : name_(std::move(name)), shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 2) throw ShapeError("param '" + name_ + "': rank must be 1 or 2");
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("param '" + name_ + "': zero-sized dimension");
    }
    const auto r = shape_.size() == 1 ? std::size_t{1} : shape_[0];
    const auto c = shape_.back();
    values_ = Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    grad_ = Matrix::Zero(values_.rows(), values_.cols());
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  Matrix& values() noexcept { return values_; }
  const Matrix& values() const noexcept { return values_; }
  Matrix& grad() noexcept { return grad_; }
  const Matrix& grad() const noexcept { return grad_; }

  void zero_grad() { grad_.setZero(); }

  /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  template <class Rng>
  void init_uniform(std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < values_.size(); ++i) values_.data()[i] = dist(rng);
  }

  bool all_finite() const { return values_.allFinite() && grad_.allFinite(); }

 private:
  std::string name_;
  std::vector<std::size_t> shape_;
  Matrix values_;
  Matrix grad_;
};

/// Non-owning list of the parameters of a model, in a stable order.
using ParamList = std::vector<ParamTensor*>;

inline void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

inline std::size_t count_values(const ParamList& params) {
  return std::accumulate(params.begin(), params.end(), std::size_t{0},
                         [](std::size_t acc, const ParamTensor* p) { return acc + p->size(); });
}

}  // namespace msched::dk
