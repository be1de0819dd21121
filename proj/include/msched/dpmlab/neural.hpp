#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "msched/diffkernel/adam.hpp"
#include "msched/diffkernel/tape.hpp"
#include "msched/dpmlab/denoiser.hpp"
#include "msched/dpmlab/mixture.hpp"
#include "msched/dpmlab/sampler.hpp"
#include "msched/errors.hpp"

namespace msched::lab {

struct NeuralTrainConfig {
  std::size_t width = 64;
  std::size_t steps = 2000;
  std::size_t batch = 128;
  double learning_rate = 2e-3;
  double t_min = kDefaultTimeEnd;
  std::uint64_t seed = 0;
};

/// Standard eps-prediction training: t ~ U[t_min, T], x_t = alpha x0 + sigma eps,
/// minimise the mean squared error against eps. Returns the network and its loss per step.
inline std::pair<std::shared_ptr<NeuralEps>, std::vector<double>> train_neural_eps(const GaussianMixture& gm,
                                                                                   const NoiseSchedule& ns,
                                                                                   const NeuralTrainConfig& cfg) {
  if (!cfg.width || !cfg.batch) throw ConfigError("neural denoiser width and batch must be positive");
  std::mt19937_64 rng(cfg.seed);
  auto net = std::make_shared<NeuralEps>(gm.dim(), cfg.width);
  net->init(rng);
  const auto params = net->params();
  dk::AdamState adam(dk::AdamOptions{.learning_rate = cfg.learning_rate});
  std::uniform_real_distribution<double> ut(cfg.t_min, ns.horizon());
  std::vector<double> history;
  std::vector<double> ts(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Matrix x0 = gm.sample(cfg.batch, rng);
    const Matrix eps = standard_normal(cfg.batch, gm.dim(), rng);
    Matrix xt(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      ts[i] = ut(rng);
      const auto np = ns.eval(ts[i]);
      const auto r = static_cast<Eigen::Index>(i);
      xt.row(r) = np.alpha * x0.row(r) + np.sigma * eps.row(r);
    }
    dk::Tape t;
    dk::zero_grads(params);
    const auto loss = dk::mse(t, net->forward(t, xt, ts), eps);
    history.push_back(t.value(loss)(0, 0));
    t.backward(loss);
    adam.step(params);
  }
  return {net, history};
}

inline Denoiser neural_model(std::string name, double latency, std::shared_ptr<NeuralEps> net) {
  Denoiser d;
  d.name = std::move(name);
  d.kind = DenoiserKind::neural;
  d.latency_ms = latency;
  d.net = std::move(net);
  return d;
}

}  // namespace msched::lab
