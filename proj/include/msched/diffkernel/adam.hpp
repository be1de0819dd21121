#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "msched/diffkernel/tensor.hpp"
#include "msched/errors.hpp"

namespace msched::dk {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are bound to a parameter list on the
/// first step and must be used with the same list afterwards.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamOptions opts) : opts_(opts) {}

  const AdamOptions& options() const noexcept { return opts_; }
  std::uint64_t step_count() const noexcept { return step_; }

  /// Applies one update from the current grads. Grads are left untouched.
  void step(const ParamList& params) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(Matrix::Zero(p->values().rows(), p->values().cols()));
        second_.push_back(Matrix::Zero(p->values().rows(), p->values().cols()));
      }
    }
    if (first_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(opts_.beta1, t);
    const double c2 = 1.0 - std::pow(opts_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      if (first_[k].rows() != p.values().rows() || first_[k].cols() != p.values().cols()) {
        throw ShapeError("adam: moment buffer shape mismatch for '" + p.name() + "'");
      }
      const double* g = p.grad().data();
      double* m = first_[k].data();
      double* v = second_[k].data();
      double* w = p.values().data();
      const auto n = p.values().size();
      for (Eigen::Index i = 0; i < n; ++i) {
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        w[i] -= opts_.learning_rate * m_hat / (std::sqrt(v_hat) + opts_.epsilon);
      }
    }
  }

 private:
  AdamOptions opts_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

inline void adam_step(AdamState& state, const ParamList& params) { state.step(params); }

}  // namespace msched::dk
