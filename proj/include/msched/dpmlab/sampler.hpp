#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msched/dpmlab/denoiser.hpp"
#include "msched/dpmlab/mixture.hpp"
#include "msched/errors.hpp"
#include "msched/schedspace/noise.hpp"
#include "msched/schedspace/plan.hpp"

namespace msched::lab {

/// Deterministic DDIM move from time s down to time t (t < s):
///   x_t = alpha_t (x_s - sigma_s eps) / alpha_s + sigma_t eps
/// Here alpha is the signal scale, i.e. the square root of the cumulative alpha-bar.
inline Matrix ddim_step(const Matrix& eps_hat, const Matrix& x_s, double s, double t, const NoiseSchedule& ns) {
  if (!(t < s)) throw StepDirectionError("ddim_step must move towards the data (t < s)");
  if (eps_hat.rows() != x_s.rows() || eps_hat.cols() != x_s.cols()) throw ShapeError("ddim_step shape mismatch");
  const auto a = ns.eval(s), b = ns.eval(t);
  return (b.alpha / a.alpha) * (x_s - a.sigma * eps_hat) + b.sigma * eps_hat;
}

template <class Rng>
Matrix standard_normal(std::size_t n, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  return x;
}

/// Denoisers are looked up by model id: denoisers[id - 1].
using DenoiserZoo = std::vector<Denoiser>;

/// Walks a DDIM plan from noise to data. Sampling starts from N(0, I) at the first
/// (noisiest) step's time; each step moves to the next step's time and the last one to t = 0.
/// `noise_seed` fixes the starting points, `model_seed` the randomness inside denoisers.
inline Matrix run_schedule(const StepPlan& plan, const DenoiserZoo& zoo, const GaussianMixture& gm,
                           const NoiseSchedule& ns, std::size_t n_samples, std::uint64_t noise_seed,
                           std::uint64_t model_seed) {
  if (plan.sampler != SamplerKind::ddim) {
    throw InvalidSchedule("the lab only executes DDIM plans; dpm-solver plans are scored by synthetic oracles");
  }
  if (plan.ddim.empty()) throw DegenerateSchedule("schedule has no active step");
  std::mt19937_64 noise_rng(noise_seed), model_rng(model_seed);
  Matrix x = standard_normal(n_samples, gm.dim(), noise_rng);
  // plan.ddim is stored data side first.
  for (std::size_t k = plan.ddim.size(); k-- > 0;) {
    const auto& step = plan.ddim[k];
    if (step.model < 1 || static_cast<std::size_t>(step.model) > zoo.size()) {
      throw InvalidSchedule("plan uses model " + std::to_string(step.model) + " outside the lab zoo");
    }
    const double next = k == 0 ? 0.0 : plan.ddim[k - 1].t;
    const auto eps = zoo[static_cast<std::size_t>(step.model) - 1].eps(gm, ns, x, step.t, model_rng);
    x = ddim_step(eps, x, step.t, next, ns);
  }
  return x;
}

/// Single-model DDIM plan on a fresh `steps`-point linear grid over [t_end, T].
inline StepPlan single_model_plan(int model, std::size_t steps, const NoiseSchedule& ns, double t_end = kDefaultTimeEnd) {
  StepPlan plan;
  plan.sampler = SamplerKind::ddim;
  const auto ts = ddim_lattice(steps, ns, t_end);
  for (std::size_t i = 0; i < ts.size(); ++i) plan.ddim.push_back({i, ts[i], model});
  return plan;
}

/// Monte-Carlo E||eps_hat(x_t, t) - eps||^2 per timestep; the same draws are reused at every t.
inline std::vector<double> per_step_loss(const Denoiser& d, const GaussianMixture& gm, const NoiseSchedule& ns,
                                         std::span<const double> timesteps, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw ConfigError("per_step_loss needs n_mc >= 1");
  std::mt19937_64 rng(seed);
  const Matrix x0 = gm.sample(n_mc, rng);
  const Matrix eps = standard_normal(n_mc, gm.dim(), rng);
  std::vector<double> out;
  for (double t : timesteps) {
    const auto np = ns.eval(t);
    const Matrix xt = np.alpha * x0 + np.sigma * eps;
    std::mt19937_64 model_rng(seed ^ 0x9e3779b97f4a7c15ull);
    const Matrix e = d.eps(gm, ns, xt, t, model_rng);
    out.push_back((e - eps).rowwise().squaredNorm().mean());
  }
  return out;
}

}  // namespace msched::lab
