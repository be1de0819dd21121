#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include "msched/errors.hpp"
#include "msched/schedspace/schedule.hpp"
#include "msched/schedspace/zoo.hpp"

namespace msched {

/// Resamples every position uniformly from {0..N} with probability `rate`. If that leaves
/// the schedule unchanged, one random position is moved to a different id.
template <class Rng>
ModelSchedule mutate(const ModelSchedule& q, std::size_t model_count, double rate, Rng& rng) {
  if (model_count < 1) throw ConfigError("mutation needs at least one model");
  if (q.entries.empty()) throw InvalidSchedule("cannot mutate an empty schedule");
  std::bernoulli_distribution flip(std::clamp(rate, 0.0, 1.0));
  std::uniform_int_distribution<int> any(0, static_cast<int>(model_count));
  ModelSchedule out = q;
  bool changed = false;
  for (auto& e : out.entries) {
    if (!flip(rng)) continue;
    const int before = e;
    e = any(rng);
    changed |= e != before;
  }
  if (!changed) {
    std::uniform_int_distribution<std::size_t> pos(0, out.entries.size() - 1);
    std::uniform_int_distribution<int> other(0, static_cast<int>(model_count) - 1);
    auto& e = out.entries[pos(rng)];
    const int v = other(rng);
    e = v >= e ? v + 1 : v;
  }
  return out;
}

/// Random feasible starting point with cost in [floor_fraction * C, C).
///
/// Uniform-entry schedules are rejection-sampled first. When that fails within `retries`
/// draws, a random schedule is repaired greedily: entries are dropped until it fits, then
/// random empty positions take the most expensive model that still fits.
/// The fill may end below the floor when no combination reaches it; the result is always
/// strictly under budget.
template <class Rng>
ModelSchedule init_schedule(const ModelZoo& zoo, std::size_t length, SamplerKind sampler, const Budget& budget,
                            double floor_fraction, Rng& rng, std::size_t retries = 10000) {
  if (zoo.size() == 0) throw ConfigError("empty model zoo");
  if (length == 0 || (sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0)) {
    throw InvalidSchedule("invalid schedule length " + std::to_string(length) + " for " + std::string(to_string(sampler)));
  }
  const double cap = budget.limit_ms();
  if (!(zoo.min_latency() < cap)) {
    throw InfeasibleBudget("budget " + std::to_string(cap) + " ms does not fit the cheapest model (" +
                           std::to_string(zoo.min_latency()) + " ms)");
  }
  const double floor = floor_fraction * cap;
  std::uniform_int_distribution<int> any(0, static_cast<int>(zoo.size()));
  ModelSchedule q{std::vector<int>(length), sampler};
  for (std::size_t attempt = 0; attempt < retries; ++attempt) {
    for (auto& e : q.entries) e = any(rng);
    const double c = get_cost(q, zoo);
    if (c >= floor && c < cap) return q;
  }

  std::vector<std::size_t> order(length);
  for (std::size_t i = 0; i < length; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  double cost = get_cost(q, zoo);
  for (auto i : order) {
    if (cost < cap) break;
    cost -= zoo.latency(q.entries[i]);
    q.entries[i] = 0;
  }
  cost = get_cost(q, zoo);  // re-sum to avoid drift from repeated subtraction

  std::vector<int> by_latency(zoo.size());
  for (std::size_t m = 0; m < zoo.size(); ++m) by_latency[m] = static_cast<int>(m) + 1;
  std::stable_sort(by_latency.begin(), by_latency.end(),
                   [&](int a, int b) { return zoo.latency(a) < zoo.latency(b); });
  std::shuffle(order.begin(), order.end(), rng);
  for (auto i : order) {
    if (cost >= floor) break;
    if (q.entries[i] != 0) continue;
    for (auto it = by_latency.rbegin(); it != by_latency.rend(); ++it) {
      if (cost + zoo.latency(*it) < cap) {
        q.entries[i] = *it;
        cost += zoo.latency(*it);
        break;
      }
    }
  }
  for (auto i : order) {
    if (get_cost(q, zoo) < cap) break;
    q.entries[i] = 0;
  }
  return q;
}

}  // namespace msched
