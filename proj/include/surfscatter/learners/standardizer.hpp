#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "surfscatter/error.hpp"
#include "surfscatter/matrix.hpp"

namespace surfscatter::learners {

/// Per-feature z-scoring with population statistics.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;

  DesignMatrix apply(const DesignMatrix& x) const {
    if (x.cols() != mean.size()) {
      throw Error(ErrorCode::DimensionMismatch, "standardizer fitted on " + std::to_string(mean.size()) +
                                                    " features, got " + std::to_string(x.cols()));
    }
    DesignMatrix out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / std_dev[c];
    return out;
  }
};

inline Standardizer fit_standardizer(const DesignMatrix& x) {
  if (x.rows() < 2) throw Error(ErrorCode::InvalidArgument, "standardizer needs at least 2 rows");
  Standardizer s;
  s.mean.assign(x.cols(), 0.0);
  s.std_dev.assign(x.cols(), 0.0);
  const auto n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) sum += x(r, c);
    const double m = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - m) * (x(r, c) - m);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      throw Error(ErrorCode::DegenerateFeature, "feature " + std::to_string(c) + " has zero variance");
    }
    s.mean[c] = m;
    s.std_dev[c] = sd;
  }
  return s;
}

inline DesignMatrix apply_standardizer(const Standardizer& s, const DesignMatrix& x) { return s.apply(x); }

}  // namespace surfscatter::learners
