#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nflreach/errors.hpp"

namespace nflreach {

// Sobol low-discrepancy sequence in up to 16 dimensions using the Joe-Kuo
// direction numbers, emitted in Gray-code order starting from the origin.
// The i-th point is a pure function of (dimension, i).
class SobolSampler {
public:
  explicit SobolSampler(int dim);

  int dim() const { return dim_; }
  std::uint64_t index() const { return index_; }

  // Next point in [0,1)^dim.
  Eigen::VectorXd next();

  // Random access, used for cross-checks; next() is equivalent to
  // point(dim, index++) but incremental.
  static Eigen::VectorXd point(int dim, std::uint64_t index);

  // Affine map of the unit cube onto [lo, hi].
  static Eigen::VectorXd map_to_box(const Eigen::VectorXd& unit,
                                    const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi);

private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> x_; // current XOR state per dimension
  std::vector<std::array<std::uint32_t, 32>> v_; // direction vectors
};

} // namespace nflreach
