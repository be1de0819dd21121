#pragma once

#include <vector>

#include "msched/dpmlab/denoiser.hpp"
#include "msched/dpmlab/oracle.hpp"
#include "msched/schedspace/zoo.hpp"

namespace msched::lab {

/// Two-model zoo whose per-step losses cross: a cheap model that drifts near the data and
/// an expensive one that drifts only right next to pure noise.
inline DenoiserZoo crossing_zoo() {
  return {
      Denoiser::perturbed_model("small", 1.0, Profile{0.3, 0.0, 1.0}, {}),
      Denoiser::perturbed_model("large", 2.5, Profile{0.0, 0.05, 4.0}, {}),
  };
}

inline ModelZoo latency_table(const DenoiserZoo& dz) {
  std::vector<ZooModel> ms;
  for (std::size_t i = 0; i < dz.size(); ++i) ms.push_back({static_cast<int>(i) + 1, dz[i].name, dz[i].latency_ms, {}});
  return ModelZoo(std::move(ms));
}

/// Synthetic solver oracle for a two-model zoo with latencies {1, 2}: the cheap model is
/// accurate near the data and poor near the noise, the expensive one is uniformly fair.
inline SyntheticOracle two_model_synthetic(const NoiseSchedule& ns = {}) {
  SyntheticOracle o;
  o.noise = ns;
  o.model_error = {Profile{0.02, 0.4, 1.0}, Profile{0.1, 0.08, 1.0}};
  return o;
}

}  // namespace msched::lab
