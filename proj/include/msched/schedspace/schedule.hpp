#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "msched/errors.hpp"

namespace msched {

enum class SamplerKind { ddim, dpm_solver };

inline std::string_view to_string(SamplerKind k) { return k == SamplerKind::ddim ? "ddim" : "dpm-solver"; }

inline SamplerKind parse_sampler_kind(std::string_view s) {
  if (s == "ddim") return SamplerKind::ddim;
  if (s == "dpm-solver" || s == "dpm_solver" || s == "dpmsolver") return SamplerKind::dpm_solver;
  throw ConfigError("unknown sampler kind '" + std::string(s) + "' (expected ddim or dpm-solver)");
}

/// Number of schedule entries consumed by one DPM-Solver step.
inline constexpr std::size_t kSolverGroup = 3;

/// Model index per pre-discretized timestep. Entry l (0-based) belongs to the l-th
/// smallest timestep, so index 0 sits nearest the data and the last index nearest the
/// noise. Id 0 is the null model (timestep unused).
struct ModelSchedule {
  std::vector<int> entries;
  SamplerKind sampler = SamplerKind::ddim;

  std::size_t length() const noexcept { return entries.size(); }

  std::size_t nonzero_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](int e) { return e != 0; }));
  }

  friend bool operator==(const ModelSchedule&, const ModelSchedule&) = default;
  friend auto operator<=>(const ModelSchedule& a, const ModelSchedule& b) {
    if (auto c = a.sampler <=> b.sampler; c != 0) return c;
    return a.entries <=> b.entries;
  }
};

/// Throws InvalidSchedule unless every entry is in {0..model_count} and the length
/// fits the sampler.
inline void validate(const ModelSchedule& q, std::size_t model_count) {
  if (q.entries.empty()) throw InvalidSchedule("schedule must have at least one entry");
  if (q.sampler == SamplerKind::dpm_solver && q.entries.size() % kSolverGroup != 0) {
    throw InvalidSchedule("dpm-solver schedule length " + std::to_string(q.entries.size()) + " is not divisible by 3");
  }
  for (std::size_t i = 0; i < q.entries.size(); ++i) {
    const int e = q.entries[i];
    if (e < 0 || static_cast<std::size_t>(e) > model_count) {
      throw InvalidSchedule("entry " + std::to_string(i) + " = " + std::to_string(e) + " outside 0.." +
                            std::to_string(model_count));
    }
  }
}

inline std::string format_entries(const ModelSchedule& q) {
  std::string out;
  for (std::size_t i = 0; i < q.entries.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(q.entries[i]);
  }
  return out;
}

}  // namespace msched
