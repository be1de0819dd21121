#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "msched/errors.hpp"

namespace msched {

/// Transformer-style timestep encoding: the first half holds sin(t * w_k), the second
/// half cos(t * w_k), with w_k = 10000^(-k / (dim/2)).
inline std::vector<double> sinusoidal_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("sinusoidal embedding dimension must be positive and even");
  if (!(t >= 0.0)) throw DomainError("sinusoidal embedding needs t >= 0");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    out[k] = std::sin(t * freq);
    out[half + k] = std::cos(t * freq);
  }
  return out;
}

}  // namespace msched
