#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "msched/errors.hpp"

namespace msched {

/// Data-side sampling endpoint. Keeps lambda finite.
inline constexpr double kDefaultTimeEnd = 1e-3;

struct NoisePoint {
  double alpha;   // signal scale
  double sigma;   // noise scale
  double lambda;  // log(alpha / sigma)
};

/// Variance-preserving linear-beta schedule on t in [0, horizon]:
///   log alpha_t = -(beta_max - beta_min) t^2 / 4 - beta_min t / 2,  sigma_t^2 = 1 - alpha_t^2.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(double beta_min, double beta_max, double horizon = 1.0)
      : beta_min_(beta_min), beta_max_(beta_max), horizon_(horizon) {
    if (!(beta_min > 0.0) || !(beta_max > beta_min) || !(horizon > 0.0)) {
      throw ConfigError("noise schedule requires 0 < beta_min < beta_max and a positive horizon");
    }
  }

  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }
  double horizon() const noexcept { return horizon_; }

  double log_alpha(double t) const { return -0.25 * t * t * (beta_max_ - beta_min_) - 0.5 * t * beta_min_; }

  NoisePoint eval(double t) const {
    check_range(t);
    const double la = log_alpha(t);
    const double sigma2 = -std::expm1(2.0 * la);
    const double alpha = std::exp(la);
    if (sigma2 <= 0.0) return {alpha, 0.0, std::numeric_limits<double>::infinity()};
    return {alpha, std::sqrt(sigma2), la - 0.5 * std::log(sigma2)};
  }

  double alpha(double t) const { return eval(t).alpha; }
  double sigma(double t) const { return eval(t).sigma; }
  double lambda(double t) const { return eval(t).lambda; }

  /// Inverts lambda(t) by bisection on [0, horizon] down to adjacent doubles.
  double time_of_lambda(double target) const {
    double lo = 0.0;  // lambda(lo) = +inf
    double hi = horizon_;
    if (target <= lambda(hi)) return hi;
    for (int it = 0; it < 2000; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (lambda(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return std::abs(lambda(lo) - target) < std::abs(lambda(hi) - target) ? lo : hi;
  }

 private:
  void check_range(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
      throw DomainError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
    }
  }

  double beta_min_ = 0.1;
  double beta_max_ = 20.0;
  double horizon_ = 1.0;
};

inline NoisePoint noise_schedule_eval(const NoiseSchedule& ns, double t) { return ns.eval(t); }

/// n_steps + 1 timesteps from t_start (noise side) to t_end (data side) with equally
/// spaced lambda. Endpoints are returned exactly.
inline std::vector<double> discretize_uniform_logsnr(const NoiseSchedule& ns, std::size_t n_steps, double t_start,
                                                     double t_end) {
  if (n_steps < 1) throw ScheduleError("uniform-logSNR discretization needs at least one step");
  if (!(t_start > t_end) || !(t_end > 0.0) || t_start > ns.horizon()) {
    throw ScheduleError("uniform-logSNR discretization requires horizon >= t_start > t_end > 0");
  }
  const double l_start = ns.lambda(t_start);
  const double l_end = ns.lambda(t_end);
  if (!(l_end > l_start)) throw ScheduleError("lambda is not decreasing over the requested interval");
  std::vector<double> ts(n_steps + 1);
  ts.front() = t_start;
  ts.back() = t_end;
  const double step = (l_end - l_start) / static_cast<double>(n_steps);
  for (std::size_t i = 1; i < n_steps; ++i) ts[i] = ns.time_of_lambda(l_start + step * static_cast<double>(i));
  return ts;
}

/// L equally spaced points from lo to hi inclusive, ascending. A single point sits at hi.
inline std::vector<double> discretize_linear(std::size_t count, double lo, double hi) {
  if (count < 1) throw ScheduleError("linear discretization needs at least one point");
  if (count == 1) return {hi};
  std::vector<double> ts(count);
  const double gap = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) ts[i] = lo + gap * static_cast<double>(i);
  ts.back() = hi;
  return ts;
}

}  // namespace msched
