#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>

#include "msched/errors.hpp"

namespace msched {

using BigInt = boost::multiprecision::cpp_int;

/// (N + 1)^L, exactly.
inline BigInt search_space_size(std::size_t model_count, std::size_t length) {
  if (model_count < 1 || length < 1) throw DomainError("search space size needs N >= 1 and L >= 1");
  return boost::multiprecision::pow(BigInt(model_count + 1), static_cast<unsigned>(length));
}

}  // namespace msched
