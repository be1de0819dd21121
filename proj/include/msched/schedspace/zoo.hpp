#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "msched/errors.hpp"
#include "msched/schedspace/schedule.hpp"

namespace msched {

struct ZooModel {
  int id = 0;
  std::string name;
  double latency_ms = 0.0;
  std::string metadata;  // free-form trailing text from the zoo file
};

/// Candidate denoisers a_1..a_N with per-call latency. The null model a_0 is implicit.
class ModelZoo {
 public:
  ModelZoo() = default;

  explicit ModelZoo(std::vector<ZooModel> models) : models_(std::move(models)) {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      const auto& m = models_[i];
      if (m.id != static_cast<int>(i) + 1) {
        throw ConfigError("zoo ids must be contiguous 1..N in order; got id " + std::to_string(m.id) + " at position " +
                          std::to_string(i + 1));
      }
      if (!(m.latency_ms > 0.0) || !std::isfinite(m.latency_ms)) {
        throw ConfigError("zoo model " + std::to_string(m.id) + " has non-positive latency");
      }
    }
  }

  /// Builds a zoo with default names from a latency list.
  static ModelZoo from_latencies(const std::vector<double>& latencies) {
    std::vector<ZooModel> ms;
    for (std::size_t i = 0; i < latencies.size(); ++i) {
      ms.push_back({static_cast<int>(i) + 1, "model" + std::to_string(i + 1), latencies[i], {}});
    }
    return ModelZoo(std::move(ms));
  }

  std::size_t size() const noexcept { return models_.size(); }
  const std::vector<ZooModel>& models() const noexcept { return models_; }
  const ZooModel& model(int id) const { return models_.at(static_cast<std::size_t>(id) - 1); }

  /// Latency of model `id`; 0 for the null model.
  double latency(int id) const {
    if (id == 0) return 0.0;
    if (id < 0 || static_cast<std::size_t>(id) > models_.size()) {
      throw InvalidSchedule("model id " + std::to_string(id) + " not in zoo of size " + std::to_string(models_.size()));
    }
    return models_[static_cast<std::size_t>(id) - 1].latency_ms;
  }

  double min_latency() const {
    double m = INFINITY;
    for (const auto& z : models_) m = std::min(m, z.latency_ms);
    return m;
  }

  std::vector<double> latencies() const {
    std::vector<double> out;
    for (const auto& m : models_) out.push_back(m.latency_ms);
    return out;
  }

  /// FNV-1a over N and the bit patterns of the latency list.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    mix(models_.size());
    for (const auto& m : models_) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &m.latency_ms, sizeof bits);
      mix(bits);
    }
    return h;
  }

 private:
  std::vector<ZooModel> models_;
};

/// Generation-time budget C in milliseconds.
class Budget {
 public:
  explicit Budget(double limit_ms) : limit_ms_(limit_ms) {
    if (!(limit_ms > 0.0) || !std::isfinite(limit_ms)) throw ConfigError("budget must be positive and finite");
  }
  double limit_ms() const noexcept { return limit_ms_; }

 private:
  double limit_ms_;
};

/// Sum of latencies over nonzero entries.
inline double get_cost(const ModelSchedule& q, const ModelZoo& zoo) {
  double total = 0.0;
  for (int e : q.entries) total += zoo.latency(e);
  return total;
}

/// Strict test: cost < C.
inline bool feasible(const ModelSchedule& q, const ModelZoo& zoo, const Budget& budget) {
  return get_cost(q, zoo) < budget.limit_ms();
}

}  // namespace msched
