#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "msched/diffkernel/layers.hpp"
#include "msched/errors.hpp"
#include "msched/dpmlab/mixture.hpp"
#include "msched/predictor/embedding.hpp"
#include "msched/schedspace/noise.hpp"

namespace msched::lab {

/// value(t) = at_data + (at_noise - at_data) * (t / T)^power
struct Profile {
  double at_data = 0.0;
  double at_noise = 0.0;
  double power = 1.0;

  double operator()(double t, double horizon) const {
    return at_data + (at_noise - at_data) * std::pow(std::max(t, 0.0) / horizon, power);
  }
  bool is_zero() const { return at_data == 0.0 && at_noise == 0.0; }
};

enum class DenoiserKind { exact, perturbed, neural };

inline const char* to_string(DenoiserKind k) {
  switch (k) {
    case DenoiserKind::exact: return "exact";
    case DenoiserKind::perturbed: return "perturbed";
    case DenoiserKind::neural: return "neural";
  }
  return "?";
}

inline DenoiserKind parse_denoiser_kind(const std::string& s) {
  if (s == "exact") return DenoiserKind::exact;
  if (s == "perturbed") return DenoiserKind::perturbed;
  if (s == "neural") return DenoiserKind::neural;
  throw ConfigError("unknown denoiser kind '" + s + "'");
}

/// Small MLP eps-predictor on [x, sinusoid(t * time_scale)].
class NeuralEps {
 public:
  NeuralEps(std::size_t dim, std::size_t width, std::size_t time_dim = 16, double time_scale = 1000.0)
      : dim_(dim),
        time_dim_(time_dim),
        time_scale_(time_scale),
        net_("denoiser", {dim + time_dim, width, width, dim}, dk::Activation::tanh, dk::Activation::identity) {}

  template <class Rng>
  void init(Rng& rng) {
    net_.init(rng);
  }

  std::size_t dim() const noexcept { return dim_; }
  dk::ParamList params() {
    dk::ParamList out;
    net_.collect(out);
    return out;
  }

  dk::Matrix features(const dk::Matrix& x, std::span<const double> ts) const {
    dk::Matrix in(x.rows(), static_cast<Eigen::Index>(dim_ + time_dim_));
    in.leftCols(static_cast<Eigen::Index>(dim_)) = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto e = sinusoidal_embedding(ts[static_cast<std::size_t>(i)] * time_scale_, time_dim_);
      for (std::size_t k = 0; k < time_dim_; ++k) in(i, static_cast<Eigen::Index>(dim_ + k)) = e[k];
    }
    return in;
  }

  dk::Var forward(dk::Tape& t, const dk::Matrix& x, std::span<const double> ts) {
    return net_.forward(t, t.constant(features(x, ts)));
  }

  dk::Matrix predict(const dk::Matrix& x, double time) const {
    std::vector<double> ts(static_cast<std::size_t>(x.rows()), time);
    dk::Tape t;
    auto& self = const_cast<NeuralEps&>(*this);  // forward only reads parameters
    return t.value(self.forward(t, x, ts));
  }

 private:
  std::size_t dim_;
  std::size_t time_dim_;
  double time_scale_;
  dk::Mlp net_;
};

/// One entry of the lab zoo: an eps-predictor with a latency.
///
/// exact:     eps = -sigma_t * score(x, t)
/// perturbed: eps = exact + bias(t) * u + gain(t) * eta,  eta ~ N(0, I) fresh per call
/// neural:    eps = mlp(x, t)
struct Denoiser {
  std::string name;
  DenoiserKind kind = DenoiserKind::exact;
  double latency_ms = 1.0;
  Profile bias;
  Profile gain;
  std::vector<double> direction;  // unit vector u; defaults to the first axis
  std::shared_ptr<NeuralEps> net;

  template <class Rng>
  Matrix eps(const GaussianMixture& gm, const NoiseSchedule& ns, const Matrix& x, double t, Rng& rng) const {
    if (kind == DenoiserKind::neural) {
      if (!net) throw ConfigError("neural denoiser '" + name + "' has no network");
      return net->predict(x, t);
    }
    Matrix e = -ns.sigma(t) * gm.score(x, ns, t);
    if (kind == DenoiserKind::exact) return e;
    const double b = bias(t, ns.horizon());
    if (b != 0.0) {
      for (Eigen::Index j = 0; j < e.cols(); ++j) e.col(j).array() += b * unit(static_cast<std::size_t>(j), e.cols());
    }
    const double g = gain(t, ns.horizon());
    if (g != 0.0) {
      std::normal_distribution<double> z(0.0, 1.0);
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] += g * z(rng);
    }
    return e;
  }

  static Denoiser exact_model(std::string name, double latency) {
    return Denoiser{std::move(name), DenoiserKind::exact, latency, {}, {}, {}, nullptr};
  }

  static Denoiser perturbed_model(std::string name, double latency, Profile bias, Profile gain) {
    return Denoiser{std::move(name), DenoiserKind::perturbed, latency, bias, gain, {}, nullptr};
  }

 private:
  double unit(std::size_t j, Eigen::Index dim) const {
    if (direction.empty()) return j == 0 ? 1.0 : 0.0;
    if (direction.size() != static_cast<std::size_t>(dim)) throw ShapeError("denoiser direction has the wrong dimension");
    double n = 0.0;
    for (double v : direction) n += v * v;
    return direction[j] / std::sqrt(n);
  }
};

}  // namespace msched::lab
