#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "msched/dpmlab/denoiser.hpp"
#include "msched/dpmlab/metric.hpp"
#include "msched/dpmlab/mixture.hpp"
#include "msched/dpmlab/sampler.hpp"
#include "msched/errors.hpp"
#include "msched/predictor/ranking.hpp"
#include "msched/schedspace/noise.hpp"
#include "msched/schedspace/plan.hpp"
#include "msched/schedspace/schedule.hpp"

namespace msched::lab {

/// Maps a schedule to a quality value; lower is better.
using QualityOracle = std::function<double(const ModelSchedule&)>;

struct LabSettings {
  std::size_t n_samples = 1000;
  std::size_t n_reference = 1000;
  std::uint64_t noise_seed = 1;
  std::uint64_t model_seed = 2;
  std::uint64_t reference_seed = 3;
  double t_end = kDefaultTimeEnd;
};

/// Ground-truth quality: energy distance between a sampled set and a fixed reference set.
/// Every evaluation reuses the same starting noise and denoiser noise, so differences
/// between schedules are not drowned by sampling noise.
class LabOracle {
 public:
  LabOracle(GaussianMixture gm, DenoiserZoo zoo, NoiseSchedule ns, LabSettings settings = {})
      : gm_(std::move(gm)), zoo_(std::move(zoo)), ns_(ns), cfg_(settings) {
    if (zoo_.empty()) throw ConfigError("lab zoo is empty");
    if (!cfg_.n_samples || !cfg_.n_reference) throw ConfigError("lab sample counts must be positive");
    std::mt19937_64 rng(cfg_.reference_seed);
    reference_ = gm_.sample(cfg_.n_reference, rng);
    reference_self_ = detail::mean_distance(reference_, reference_);
  }

  const GaussianMixture& mixture() const noexcept { return gm_; }
  const DenoiserZoo& zoo() const noexcept { return zoo_; }
  const NoiseSchedule& noise() const noexcept { return ns_; }
  const LabSettings& settings() const noexcept { return cfg_; }
  const Matrix& reference() const noexcept { return reference_; }

  double score_samples(const Matrix& samples) const {
    if (samples.cols() != reference_.cols()) throw ShapeError("sample dimension does not match the lab");
    return 2.0 * detail::mean_distance(samples, reference_) - detail::mean_distance(samples, samples) - reference_self_;
  }

  /// Quality of doing nothing: the starting noise itself.
  double noise_quality() const {
    std::mt19937_64 rng(cfg_.noise_seed);
    return score_samples(standard_normal(cfg_.n_samples, gm_.dim(), rng));
  }

  double quality(const StepPlan& plan) const {
    if (plan.sampler == SamplerKind::ddim && plan.ddim.empty()) return noise_quality();
    return score_samples(run_schedule(plan, zoo_, gm_, ns_, cfg_.n_samples, cfg_.noise_seed, cfg_.model_seed));
  }

  double quality(const ModelSchedule& q) const {
    validate(q, zoo_.size());
    return quality(decode_schedule(q, ns_, cfg_.t_end));
  }

  double operator()(const ModelSchedule& q) const { return quality(q); }

 private:
  GaussianMixture gm_;
  DenoiserZoo zoo_;
  NoiseSchedule ns_;
  LabSettings cfg_;
  Matrix reference_;
  double reference_self_ = 0.0;
};

/// Quality = sum of per-call weights; schedules with no call get `empty_penalty`, which
/// defaults to something worse than any schedule that calls a model.
struct LinearCountOracle {
  std::vector<double> weight;  // indexed by model id, weight[0] for skipped positions
  double empty_penalty = std::numeric_limits<double>::quiet_NaN();

  double operator()(const ModelSchedule& q) const {
    for (int e : q.entries) {
      if (e < 0 || static_cast<std::size_t>(e) >= weight.size()) throw InvalidSchedule("model id outside oracle");
    }
    if (q.nonzero_count() == 0) {
      if (!std::isnan(empty_penalty)) return empty_penalty;
      const double worst = *std::max_element(weight.begin(), weight.end());
      return static_cast<double>(q.length()) * std::abs(worst) + 1.0;
    }
    double f = 0.0;
    for (int e : q.entries) f += weight[static_cast<std::size_t>(e)];
    return f;
  }
};

/// Error model of a multistep sampler. Every active step pays a discretisation term
/// disc * (h / H)^(order + 1), where h is its logSNR width and H the width of the whole
/// range, plus the mean error of its models. A step's j-th model (of k) is charged its
/// error at the time a fraction j/k of the way through the step in logSNR, so the order of
/// models inside a group matters. DDIM steps are first order and span down to the next
/// active step, the last one to t_end.
struct SyntheticOracle {
  NoiseSchedule noise{};
  double t_end = kDefaultTimeEnd;
  std::vector<Profile> model_error;  // model_error[id - 1]
  double discretization = 1.0;
  double empty_penalty = 100.0;

  double operator()(const ModelSchedule& q) const {
    validate(q, model_error.size());
    const auto plan = decode_schedule(q, noise, t_end);
    if (plan.empty()) return empty_penalty;
    const double T = noise.horizon();
    const double range = noise.lambda(t_end) - noise.lambda(T);
    auto err = [&](int model, double t) { return model_error[static_cast<std::size_t>(model) - 1](t, T); };
    double f = 0.0;
    if (plan.sampler == SamplerKind::ddim) {
      for (std::size_t k = 0; k < plan.ddim.size(); ++k) {
        const auto& s = plan.ddim[k];
        const double lo = k == 0 ? t_end : plan.ddim[k - 1].t;
        const double h = (noise.lambda(lo) - noise.lambda(s.t)) / range;
        f += discretization * h * h + err(s.model, s.t);
      }
    } else {
      for (const auto& s : plan.solver) {
        const double h = s.lambda_data - s.lambda_noise;
        const auto k = s.models.size();
        double e = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          const double t = j == 0 ? s.t_noise
                                  : noise.time_of_lambda(s.lambda_noise + h * static_cast<double>(j) / static_cast<double>(k));
          e += err(s.models[j], t);
        }
        f += discretization * std::pow(h / range, static_cast<double>(s.order + 1)) + e / static_cast<double>(k);
      }
    }
    return f;
  }
};

/// Per-position categorical distribution over {0..N}.
struct SamplingFamily {
  std::string name;
  std::vector<double> probs;
};

/// `count` schedules; record i comes from family i mod |families|, each position drawn
/// independently from that family's distribution.
inline std::vector<ScheduleRecord> generate_training_data(std::size_t model_count, std::size_t length,
                                                          SamplerKind sampler, const QualityOracle& oracle,
                                                          const std::vector<SamplingFamily>& families,
                                                          std::size_t count, std::uint64_t seed) {
  if (families.empty()) throw ConfigError("at least one sampling family is required");
  if (length == 0 || (sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0)) {
    throw ConfigError("invalid schedule length " + std::to_string(length) + " for " + std::string(to_string(sampler)));
  }
  std::vector<std::discrete_distribution<int>> draws;
  for (const auto& f : families) {
    if (f.probs.size() != model_count + 1) {
      throw ConfigError("family '" + f.name + "' needs " + std::to_string(model_count + 1) + " probabilities");
    }
    double total = 0.0;
    for (double p : f.probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("family '" + f.name + "' has a negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("family '" + f.name + "' probabilities do not sum to 1");
    draws.emplace_back(f.probs.begin(), f.probs.end());
  }
  std::mt19937_64 rng(seed);
  std::vector<ScheduleRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto k = i % families.size();
    ModelSchedule q{std::vector<int>(length), sampler};
    for (auto& e : q.entries) e = draws[k](rng);
    const double f = oracle(q);
    out.push_back({std::move(q), f, families[k].name});
  }
  return out;
}

}  // namespace msched::lab
