#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msched/diffkernel/tape.hpp"
#include "msched/errors.hpp"
#include "msched/schedspace/schedule.hpp"

namespace msched {

/// A schedule with its measured quality (lower is better).
struct ScheduleRecord {
  ModelSchedule schedule;
  double quality = 0.0;
  std::string family;  // sampling family that produced it; empty if unknown
};

/// Ordered comparison pair: `better` has strictly lower measured quality than `worse`.
struct RankPair {
  std::size_t better;
  std::size_t worse;
  friend bool operator==(const RankPair&, const RankPair&) = default;
};

/// Draws at most floor(compare_ratio * b) pairs, uniformly without replacement among
/// the pairs whose quality gap exceeds `threshold`.
template <class Rng>
std::vector<RankPair> sample_pairs(std::span<const double> qualities, double compare_ratio, double threshold, Rng& rng) {
  std::vector<RankPair> qualifying;
  for (std::size_t a = 0; a < qualities.size(); ++a) {
    for (std::size_t b = a + 1; b < qualities.size(); ++b) {
      if (std::abs(qualities[a] - qualities[b]) <= threshold) continue;
      qualifying.push_back(qualities[a] < qualities[b] ? RankPair{a, b} : RankPair{b, a});
    }
  }
  const auto cap = static_cast<std::size_t>(std::floor(compare_ratio * static_cast<double>(qualities.size())));
  const auto take = std::min(cap, qualifying.size());
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, qualifying.size() - 1);
    std::swap(qualifying[k], qualifying[pick(rng)]);
  }
  qualifying.resize(take);
  return qualifying;
}

inline void check_pairs(std::span<const double> qualities, std::span<const RankPair> pairs) {
  for (const auto& p : pairs) {
    if (p.better >= qualities.size() || p.worse >= qualities.size()) throw PairSelectionError("pair index out of range");
    if (!(qualities[p.worse] > qualities[p.better])) {
      throw PairSelectionError("pair (" + std::to_string(p.better) + ", " + std::to_string(p.worse) +
                               ") is not ordered by quality");
    }
  }
}

/// Hinge ranking loss on a [batch x 1] score column:
///   sum over pairs of max(0, margin - (score[worse] - score[better])).
/// The subgradient at the kink is 0.
inline dk::Var pairwise_hinge(dk::Tape& t, dk::Var scores, std::span<const RankPair> pairs, double margin) {
  const auto& s = t.value(scores);
  if (s.cols() != 1) throw ShapeError("pairwise_hinge expects a single score column");
  dk::Matrix y(1, 1);
  y(0, 0) = 0.0;
  std::vector<RankPair> active;
  for (const auto& p : pairs) {
    const double slack = margin - (s(static_cast<Eigen::Index>(p.worse), 0) - s(static_cast<Eigen::Index>(p.better), 0));
    if (!(slack <= 0)) {  // keeps NaN so a diverged predictor shows up in the loss
      y(0, 0) += slack;
      active.push_back(p);
    }
  }
  return t.push(std::move(y), [scores, active = std::move(active)](dk::Tape& tp, std::size_t self) {
    const double g = tp.grad(dk::Var{self})(0, 0);
    auto& gs = tp.grad_mut(scores.id);
    for (const auto& p : active) {
      gs(static_cast<Eigen::Index>(p.worse), 0) -= g;
      gs(static_cast<Eigen::Index>(p.better), 0) += g;
    }
  });
}

/// Kendall's tau-a: (concordant - discordant) / (n (n - 1) / 2); tied pairs count as neither.
inline double kendall_tau(std::span<const double> scores, std::span<const double> truths) {
  if (scores.size() != truths.size()) throw ShapeError("kendall_tau: length mismatch");
  const std::size_t n = scores.size();
  if (n < 2) throw DomainError("kendall_tau needs at least two observations");
  long long balance = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ds = scores[i] - scores[j];
      const double dt = truths[i] - truths[j];
      if (ds == 0 || dt == 0) continue;
      balance += (ds > 0) == (dt > 0) ? 1 : -1;
    }
  }
  return static_cast<double>(balance) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace msched
