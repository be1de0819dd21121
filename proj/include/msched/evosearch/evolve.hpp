#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "msched/errors.hpp"
#include "msched/evosearch/mutate.hpp"
#include "msched/schedspace/schedule.hpp"
#include "msched/schedspace/zoo.hpp"

namespace msched {

struct SearchConfig {
  std::size_t epochs = 600;
  std::size_t candidate_parents = 10;  // M_CP
  std::size_t iter = 200;
  std::size_t next_generation_cap = 40;  // M_NG
  std::size_t population_cap = 40;       // M_P
  double mutation_rate = 0.1;
  Budget budget{1.0};
  double init_cost_floor_fraction = 0.9;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // stop after this many epochs without improvement; 0 runs every epoch

  void validate() const {
    if (!candidate_parents || !iter || !next_generation_cap || !population_cap) {
      throw ConfigError("search caps must be positive");
    }
    if (!(mutation_rate > 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation_rate must be in (0, 1]");
    if (!(init_cost_floor_fraction > 0.0 && init_cost_floor_fraction < 1.0)) {
      throw ConfigError("init_cost_floor_fraction must be in (0, 1)");
    }
  }
};

/// Scores many schedules at once; lower is better. Must be pure.
using BatchScorer = std::function<std::vector<double>(std::span<const ModelSchedule>)>;
using Scorer = std::function<double(const ModelSchedule&)>;

inline BatchScorer batched(Scorer one) {
  return [one = std::move(one)](std::span<const ModelSchedule> qs) {
    std::vector<double> out;
    out.reserve(qs.size());
    for (const auto& q : qs) out.push_back(one(q));
    return out;
  };
}

struct EpochStats {
  double best_score;
  std::size_t population;
  std::size_t children;
  std::size_t attempts;
};

struct SearchResult {
  ModelSchedule best;
  double score = 0.0;
  double cost = 0.0;
  std::vector<EpochStats> trace;
  std::size_t evaluations = 0;  // distinct schedules scored
};

namespace detail {

struct Scored {
  ModelSchedule q;
  double score;
};

// NaN scores rank last so they can never become the answer.
inline double rank_key(double s) { return std::isnan(s) ? std::numeric_limits<double>::infinity() : s; }

inline bool better(const Scored& a, const Scored& b) {
  const double x = rank_key(a.score), y = rank_key(b.score);
  if (x != y) return x < y;
  return a.q.entries < b.q.entries;
}

}  // namespace detail

/// Budget-constrained evolutionary search:
///
///   P <- {one feasible schedule}
///   repeat T times:
///     CP <- min(M_CP, |P|) members of P drawn without replacement
///     q  <- best of CP
///     NG <- up to M_NG distinct feasible mutants of q not already in P, from at most `iter` tries
///     P  <- P + NG, then drop the worst until |P| <= M_P
///
/// Equal scores are broken by the lexicographically smaller schedule.
inline SearchResult evolve(const BatchScorer& scorer, const ModelZoo& zoo, std::size_t length, SamplerKind sampler,
                           const SearchConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SearchResult res;

  std::map<std::vector<int>, double> cache;
  auto score_all = [&](const std::vector<ModelSchedule>& qs) {
    std::vector<ModelSchedule> fresh;
    for (const auto& q : qs) {
      if (!cache.count(q.entries)) fresh.push_back(q);
    }
    if (!fresh.empty()) {
      const auto s = scorer(fresh);
      if (s.size() != fresh.size()) throw ShapeError("scorer returned the wrong number of scores");
      for (std::size_t i = 0; i < fresh.size(); ++i) cache.emplace(fresh[i].entries, s[i]);
      res.evaluations += fresh.size();
    }
    std::vector<detail::Scored> out;
    for (const auto& q : qs) out.push_back({q, cache.at(q.entries)});
    return out;
  };

  const auto first = init_schedule(zoo, length, sampler, cfg.budget, cfg.init_cost_floor_fraction, rng);
  std::vector<detail::Scored> pop = score_all({first});
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> idx(pop.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t k = std::min(cfg.candidate_parents, pop.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::size_t parent = idx[0];
    for (std::size_t i = 1; i < k; ++i) {
      if (detail::better(pop[idx[i]], pop[parent])) parent = idx[i];
    }
    const ModelSchedule q = pop[parent].q;

    std::vector<ModelSchedule> children;
    std::size_t attempts = 0;
    while (attempts < cfg.iter && children.size() < cfg.next_generation_cap) {
      ++attempts;
      auto child = mutate(q, zoo.size(), cfg.mutation_rate, rng);
      if (!feasible(child, zoo, cfg.budget)) continue;
      const bool seen =
          std::any_of(pop.begin(), pop.end(), [&](const auto& m) { return m.q == child; }) ||
          std::find(children.begin(), children.end(), child) != children.end();
      if (!seen) children.push_back(std::move(child));
    }

    const double before = detail::rank_key(
        std::min_element(pop.begin(), pop.end(), detail::better)->score);
    for (auto& s : score_all(children)) pop.push_back(std::move(s));
    std::sort(pop.begin(), pop.end(), detail::better);
    if (pop.size() > cfg.population_cap) pop.resize(cfg.population_cap);

    res.trace.push_back({pop.front().score, pop.size(), children.size(), attempts});
    stale = detail::rank_key(pop.front().score) < before ? 0 : stale + 1;
    if (cfg.patience && stale >= cfg.patience) break;
  }

  const auto& top = *std::min_element(pop.begin(), pop.end(), detail::better);
  res.best = top.q;
  res.score = top.score;
  res.cost = get_cost(top.q, zoo);
  return res;
}

inline SearchResult evolve(const Scorer& scorer, const ModelZoo& zoo, std::size_t length, SamplerKind sampler,
                           const SearchConfig& cfg) {
  return evolve(batched(scorer), zoo, length, sampler, cfg);
}

}  // namespace msched
