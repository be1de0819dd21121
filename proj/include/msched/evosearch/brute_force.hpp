#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msched/errors.hpp"
#include "msched/evosearch/evolve.hpp"
#include "msched/schedspace/schedule.hpp"
#include "msched/schedspace/space_size.hpp"
#include "msched/schedspace/zoo.hpp"

namespace msched {

inline constexpr std::size_t kBruteForceLimit = 10'000'000;

struct BruteForceResult {
  ModelSchedule best;
  double score = 0.0;
  double cost = 0.0;
  std::size_t examined = 0;  // every schedule in the space, feasible or not
  std::size_t feasible = 0;
};

/// Exhaustive minimum over all (N+1)^L schedules under the strict budget test. The
/// all-zero schedule always fits, so there is always an answer.
inline BruteForceResult brute_force(const BatchScorer& scorer, const ModelZoo& zoo, std::size_t length,
                                    SamplerKind sampler, const Budget& budget, std::size_t chunk = 4096) {
  if (length == 0 || (sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0)) {
    throw InvalidSchedule("invalid schedule length " + std::to_string(length) + " for " + std::string(to_string(sampler)));
  }
  const BigInt size = search_space_size(zoo.size(), length);
  if (size > BigInt(kBruteForceLimit)) {
    throw SearchSpaceTooLarge("search space has " + size.str() + " schedules; brute force is limited to " +
                              std::to_string(kBruteForceLimit));
  }
  const int top = static_cast<int>(zoo.size());

  BruteForceResult res;
  bool have = false;
  std::vector<ModelSchedule> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const auto s = scorer(pending);
    if (s.size() != pending.size()) throw ShapeError("scorer returned the wrong number of scores");
    for (std::size_t i = 0; i < pending.size(); ++i) {
      // Enumeration is lexicographic, so strict improvement keeps the smaller schedule on ties.
      if (!have || detail::rank_key(s[i]) < detail::rank_key(res.score)) {
        res.best = pending[i];
        res.score = s[i];
        have = true;
      }
    }
    pending.clear();
  };

  ModelSchedule q{std::vector<int>(length, 0), sampler};
  while (true) {
    ++res.examined;
    if (feasible(q, zoo, budget)) {
      ++res.feasible;
      pending.push_back(q);
      if (pending.size() >= chunk) flush();
    }
    std::size_t i = length;
    while (i > 0 && q.entries[i - 1] == top) q.entries[--i] = 0;
    if (i == 0) break;
    ++q.entries[i - 1];
  }
  flush();
  res.cost = get_cost(res.best, zoo);
  return res;
}

inline BruteForceResult brute_force(const Scorer& scorer, const ModelZoo& zoo, std::size_t length, SamplerKind sampler,
                                    const Budget& budget) {
  return brute_force(batched(scorer), zoo, length, sampler, budget);
}

}  // namespace msched
