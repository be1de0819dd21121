#pragma once

#include "msched/dpmlab/mixture.hpp"
#include "msched/errors.hpp"

namespace msched::lab {

namespace detail {

inline double mean_distance(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) row += (a.row(i) - b.row(j)).norm();
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace detail

/// Energy distance 2 E|X - Y| - E|X - X'| - E|Y - Y'| with every empirical pair included
/// (V-statistic), so identical sets give exactly 0.
inline double energy_distance(const Matrix& samples, const Matrix& reference) {
  if (samples.rows() == 0 || reference.rows() == 0) throw ShapeError("energy distance needs nonempty sets");
  if (samples.cols() != reference.cols()) throw ShapeError("energy distance: dimension mismatch");
  return 2.0 * detail::mean_distance(samples, reference) - detail::mean_distance(samples, samples) -
         detail::mean_distance(reference, reference);
}

}  // namespace msched::lab
