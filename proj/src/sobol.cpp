#include "nflreach/sobol.hpp"

#include <array>
#include <bit>

namespace nflreach {

namespace {

// Joe-Kuo D6 primitive polynomials and initial direction numbers for
// dimensions 2..16 (dimension 1 is the van der Corput sequence).
struct JoeKuoRow {
  int degree;
  std::uint32_t poly; // encoded middle coefficients
  std::array<std::uint32_t, 6> m;
};

constexpr JoeKuoRow kJoeKuo[] = {
    {1, 0, {1, 0, 0, 0, 0, 0}},        // dim 2
    {2, 1, {1, 3, 0, 0, 0, 0}},        // dim 3
    {3, 1, {1, 3, 1, 0, 0, 0}},        // dim 4
    {3, 2, {1, 1, 1, 0, 0, 0}},        // dim 5
    {4, 1, {1, 1, 3, 3, 0, 0}},        // dim 6
    {4, 4, {1, 3, 5, 13, 0, 0}},       // dim 7
    {5, 2, {1, 1, 5, 5, 17, 0}},       // dim 8
    {5, 4, {1, 1, 5, 5, 5, 0}},        // dim 9
    {5, 7, {1, 1, 7, 11, 19, 0}},      // dim 10
    {5, 11, {1, 1, 5, 1, 1, 0}},       // dim 11
    {5, 13, {1, 1, 1, 3, 11, 0}},      // dim 12
    {5, 14, {1, 3, 5, 5, 31, 0}},      // dim 13
    {6, 1, {1, 3, 3, 9, 7, 49}},       // dim 14
    {6, 13, {1, 1, 1, 15, 21, 21}},    // dim 15
    {6, 16, {1, 3, 1, 13, 27, 49}},    // dim 16
};

constexpr int kBits = 32;

std::array<std::uint32_t, 32> direction_vectors(int dim_index) {
  std::array<std::uint32_t, 32> v{};
  if (dim_index == 0) {
    for (int j = 0; j < kBits; ++j)
      v[j] = 1u << (31 - j);
    return v;
  }
  const JoeKuoRow& row = kJoeKuo[dim_index - 1];
  const int s = row.degree;
  for (int j = 0; j < s; ++j)
    v[j] = row.m[j] << (31 - j);
  for (int j = s; j < kBits; ++j) {
    v[j] = v[j - s] ^ (v[j - s] >> s);
    for (int i = 1; i < s; ++i)
      if ((row.poly >> (s - 1 - i)) & 1u)
        v[j] ^= v[j - i];
  }
  return v;
}

} // namespace

SobolSampler::SobolSampler(int dim) : dim_(dim) {
  if (dim < 1 || dim > 16)
    throw ConfigError("SobolSampler: dimension must be in 1..16");
  x_.assign(dim, 0u);
  v_.resize(dim);
  for (int d = 0; d < dim; ++d)
    v_[d] = direction_vectors(d);
}

Eigen::VectorXd SobolSampler::next() {
  Eigen::VectorXd p(dim_);
  if (index_ == 0) {
    p.setZero();
    ++index_;
    return p;
  }
  const int c = std::countr_zero(index_);
  for (int d = 0; d < dim_; ++d) {
    x_[d] ^= v_[d][c];
    p(d) = static_cast<double>(x_[d]) * 0x1.0p-32;
  }
  ++index_;
  return p;
}

Eigen::VectorXd SobolSampler::point(int dim, std::uint64_t index) {
  SobolSampler s(dim);
  Eigen::VectorXd p;
  for (std::uint64_t i = 0; i <= index; ++i)
    p = s.next();
  return p;
}

Eigen::VectorXd SobolSampler::map_to_box(const Eigen::VectorXd& unit,
                                         const Eigen::VectorXd& lo,
                                         const Eigen::VectorXd& hi) {
  return lo.array() + unit.array() * (hi - lo).array();
}

} // namespace nflreach
