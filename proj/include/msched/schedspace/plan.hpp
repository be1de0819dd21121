#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "msched/errors.hpp"
#include "msched/schedspace/noise.hpp"
#include "msched/schedspace/schedule.hpp"

namespace msched {

/// One active DDIM timestep.
struct DdimStep {
  std::size_t position;  // index into the schedule
  double t;
  int model;
};

/// One DPM-Solver step covering a lambda interval. `models` is in application order.
struct SolverStep {
  std::size_t group;  // group index, 0 nearest the data
  int order;
  std::vector<int> models;
  double t_noise;  // interval endpoint on the noise side (larger t)
  double t_data;
  double lambda_noise;
  double lambda_data;
};

/// Executable sampling plan. Both step lists are stored by increasing timestep
/// (data side first); execution walks them back to front.
struct StepPlan {
  SamplerKind sampler = SamplerKind::ddim;
  std::vector<DdimStep> ddim;
  std::vector<SolverStep> solver;

  bool empty() const noexcept { return ddim.empty() && solver.empty(); }

  std::size_t step_count() const noexcept { return sampler == SamplerKind::ddim ? ddim.size() : solver.size(); }

  std::size_t model_calls() const {
    if (sampler == SamplerKind::ddim) return ddim.size();
    std::size_t n = 0;
    for (const auto& s : solver) n += s.models.size();
    return n;
  }
};

/// The L-point linear DDIM lattice over [t_end, horizon].
inline std::vector<double> ddim_lattice(std::size_t length, const NoiseSchedule& ns, double t_end = kDefaultTimeEnd) {
  return discretize_linear(length, t_end, ns.horizon());
}

/// Decodes a schedule into its sampling plan.
///
/// DDIM: the active timesteps are the lattice points whose entry is nonzero.
/// DPM-Solver: consecutive triples form groups; all-zero groups are dropped; a group's
/// order is its nonzero count; the K active groups receive the K uniform-logSNR
/// intervals of [t_end, horizon], the highest group nearest the noise. Inside a group
/// models run from the highest position to the lowest.
inline StepPlan decode_schedule(const ModelSchedule& q, const NoiseSchedule& ns, double t_end = kDefaultTimeEnd) {
  StepPlan plan;
  plan.sampler = q.sampler;
  if (q.entries.empty()) throw InvalidSchedule("cannot decode an empty schedule");
  for (int e : q.entries) {
    if (e < 0) throw InvalidSchedule("negative model id in schedule");
  }

  if (q.sampler == SamplerKind::ddim) {
    const auto lattice = ddim_lattice(q.length(), ns, t_end);
    for (std::size_t i = 0; i < q.length(); ++i) {
      if (q.entries[i] != 0) plan.ddim.push_back({i, lattice[i], q.entries[i]});
    }
    return plan;
  }

  if (q.length() % kSolverGroup != 0) {
    throw InvalidSchedule("dpm-solver schedule length " + std::to_string(q.length()) + " is not divisible by 3");
  }
  const std::size_t groups = q.length() / kSolverGroup;
  std::vector<std::size_t> active;  // descending: noise side first
  for (std::size_t g = groups; g-- > 0;) {
    const auto* e = &q.entries[g * kSolverGroup];
    if (e[0] != 0 || e[1] != 0 || e[2] != 0) active.push_back(g);
  }
  if (active.empty()) return plan;

  const auto ts = discretize_uniform_logsnr(ns, active.size(), ns.horizon(), t_end);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t g = active[k];
    SolverStep step{g, 0, {}, ts[k], ts[k + 1], ns.lambda(ts[k]), ns.lambda(ts[k + 1])};
    for (std::size_t j = kSolverGroup; j-- > 0;) {
      const int m = q.entries[g * kSolverGroup + j];
      if (m != 0) step.models.push_back(m);
    }
    step.order = static_cast<int>(step.models.size());
    plan.solver.push_back(std::move(step));
  }
  std::reverse(plan.solver.begin(), plan.solver.end());
  return plan;
}

}  // namespace msched
