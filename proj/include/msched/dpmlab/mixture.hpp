#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msched/diffkernel/tensor.hpp"
#include "msched/errors.hpp"
#include "msched/schedspace/noise.hpp"

namespace msched::lab {

using dk::Matrix;

struct MixtureComponent {
  double weight;
  std::vector<double> mean;
  double scale;  // isotropic standard deviation s
};

/// Isotropic Gaussian mixture in 1 or 2 dimensions; the stand-in data distribution.
class GaussianMixture {
 public:
  GaussianMixture(std::size_t dim, std::vector<MixtureComponent> comps) : dim_(dim), comps_(std::move(comps)) {
    if (dim_ != 1 && dim_ != 2) throw ConfigError("mixture dimension must be 1 or 2");
    if (comps_.empty()) throw ConfigError("mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : comps_) {
      if (!(c.weight > 0.0)) throw ConfigError("mixture weights must be positive");
      if (!(c.scale >= 0.0) || !std::isfinite(c.scale)) throw ConfigError("mixture scales must be finite and >= 0");
      if (c.mean.size() != dim_) throw ShapeError("mixture mean has the wrong dimension");
      total += c.weight;
    }
    for (auto& c : comps_) c.weight /= total;
  }

  /// `count` components evenly spaced on a circle, equal weights.
  static GaussianMixture ring(std::size_t count = 8, double radius = 4.0, double scale = 0.3) {
    std::vector<MixtureComponent> cs;
    for (std::size_t k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      cs.push_back({1.0, {radius * std::cos(a), radius * std::sin(a)}, scale});
    }
    return GaussianMixture(2, std::move(cs));
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<MixtureComponent>& components() const noexcept { return comps_; }

  /// Total variance per coordinate, averaged over coordinates.
  double variance() const {
    double second = 0.0;
    std::vector<double> mu(dim_, 0.0);
    for (const auto& c : comps_) {
      for (std::size_t j = 0; j < dim_; ++j) {
        mu[j] += c.weight * c.mean[j];
        second += c.weight * (c.mean[j] * c.mean[j] + c.scale * c.scale);
      }
    }
    double m2 = 0.0;
    for (double m : mu) m2 += m * m;
    return (second - m2) / static_cast<double>(dim_);
  }

  template <class Rng>
  Matrix sample(std::size_t n, Rng& rng) const {
    std::vector<double> w;
    for (const auto& c : comps_) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto& c = comps_[pick(rng)];
      for (std::size_t j = 0; j < dim_; ++j) x(i, static_cast<Eigen::Index>(j)) = c.mean[j] + c.scale * z(rng);
    }
    return x;
  }

  /// log q_t(x) where q_t is the law of alpha_t x0 + sigma_t eps.
  double log_density(std::span<const double> x, const NoiseSchedule& ns, double t) const {
    const auto np = ns.eval(t);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    for (const auto& c : comps_) {
      const double v = marginal_variance(c, np);
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) d2 += sq(x[j] - np.alpha * c.mean[j]);
      const double l = std::log(c.weight) - 0.5 * d2 / v - 0.5 * static_cast<double>(dim_) * std::log(2 * std::numbers::pi * v);
      logs.push_back(l);
      best = std::max(best, l);
    }
    double s = 0.0;
    for (double l : logs) s += std::exp(l - best);
    return best + std::log(s);
  }

  /// grad_x log q_t(x) for every row of x.
  Matrix score(const Matrix& x, const NoiseSchedule& ns, double t) const {
    if (x.cols() != static_cast<Eigen::Index>(dim_)) throw ShapeError("score input has the wrong dimension");
    const auto np = ns.eval(t);
    const std::size_t K = comps_.size();
    std::vector<double> var(K), logw(K);
    for (std::size_t k = 0; k < K; ++k) {
      var[k] = marginal_variance(comps_[k], np);
      logw[k] = std::log(comps_[k].weight) - 0.5 * static_cast<double>(dim_) * std::log(var[k]);
    }
    Matrix out(x.rows(), x.cols());
    std::vector<double> logr(K);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) d2 += sq(x(i, static_cast<Eigen::Index>(j)) - np.alpha * comps_[k].mean[j]);
        logr[k] = logw[k] - 0.5 * d2 / var[k];
        best = std::max(best, logr[k]);
      }
      double z = 0.0;
      for (auto& l : logr) z += (l = std::exp(l - best));
      for (std::size_t j = 0; j < dim_; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        double g = 0.0;
        for (std::size_t k = 0; k < K; ++k) g -= logr[k] * (x(i, jj) - np.alpha * comps_[k].mean[j]) / var[k];
        out(i, jj) = g / z;
      }
    }
    return out;
  }

 private:
  static double sq(double v) { return v * v; }

  static double marginal_variance(const MixtureComponent& c, const NoisePoint& np) {
    const double v = np.alpha * np.alpha * c.scale * c.scale + np.sigma * np.sigma;
    if (!(v > 0.0)) throw SingularityError("zero-width component at t = 0 has no score");
    return v;
  }

  std::size_t dim_;
  std::vector<MixtureComponent> comps_;
};

}  // namespace msched::lab
