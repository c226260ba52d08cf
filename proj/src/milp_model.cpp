#include "nflreach/milp_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace nflreach {

bool Interval::is_finite() const {
  return std::isfinite(lo) && std::isfinite(hi);
}

Interval Interval::intersect(const Interval& o) const {
  return {std::max(lo, o.lo), std::min(hi, o.hi)};
}

Interval Interval::hull(const Interval& o) const {
  return {std::min(lo, o.lo), std::max(hi, o.hi)};
}

LinExpr LinExpr::of(VarId v, double coef) {
  LinExpr e;
  e.add(coef, v);
  return e;
}

LinExpr& LinExpr::add(double coef, VarId v) {
  if (!std::isfinite(coef))
    throw EncodingError("LinExpr: non-finite coefficient");
  if (!v.valid())
    throw EncodingError("LinExpr: invalid variable id");
  terms_.push_back({coef, v});
  return *this;
}

LinExpr& LinExpr::add_constant(double c) {
  if (!std::isfinite(c))
    throw EncodingError("LinExpr: non-finite constant");
  constant_ += c;
  return *this;
}

std::vector<LinTerm> LinExpr::canonical_terms() const {
  std::map<std::uint32_t, double> merged;
  for (const auto& t : terms_)
    merged[t.var.index] += t.coef;
  std::vector<LinTerm> out;
  out.reserve(merged.size());
  for (const auto& [idx, c] : merged)
    if (c != 0.0)
      out.push_back({c, VarId{idx}});
  return out;
}

Polytope::Polytope(Eigen::MatrixXd A, Eigen::VectorXd b)
    : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() < 1 || A_.rows() != b_.size())
    throw EncodingError("Polytope: A and b sizes disagree or empty");
  for (Eigen::Index i = 0; i < A_.rows(); ++i) {
    if (A_.row(i).cwiseAbs().maxCoeff() == 0.0)
      throw EncodingError("Polytope: all-zero row " + std::to_string(i));
    if (!A_.row(i).allFinite() || !std::isfinite(b_(i)))
      throw EncodingError("Polytope: non-finite entry in row " +
                          std::to_string(i));
  }
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const Eigen::Index n = lo.size();
  if (n == 0 || hi.size() != n)
    throw EncodingError("Polytope::box: bad corner sizes");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, n);
  Eigen::VectorXd b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(2 * i, i) = 1.0;
    b(2 * i) = hi(i);
    A(2 * i + 1, i) = -1.0;
    b(2 * i + 1) = -lo(i);
  }
  return Polytope(std::move(A), std::move(b));
}

double Polytope::max_residual(const Eigen::VectorXd& x) const {
  return (A_ * x - b_).maxCoeff();
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  return max_residual(x) <= tol;
}

bool Polytope::interior_contains(const Eigen::VectorXd& x, double tol) const {
  return max_residual(x) < -tol;
}

double NormBall::distance(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd d = x - center;
  return p == Norm::Linf ? d.lpNorm<Eigen::Infinity>() : d.lpNorm<1>();
}

bool NormBall::contains(const Eigen::VectorXd& x, double tol) const {
  return distance(x) <= radius + tol;
}

Polytope NormBall::to_polytope() const {
  const Eigen::Index n = center.size();
  if (p == Norm::Linf) {
    Eigen::VectorXd lo = center.array() - radius;
    Eigen::VectorXd hi = center.array() + radius;
    return Polytope::box(lo, hi);
  }
  if (n > 16)
    throw EncodingError("NormBall::to_polytope: p=1 cross-polytope refused "
                        "above dimension 16 (2^n facets)");
  const std::size_t facets = std::size_t{1} << n;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(facets), n);
  Eigen::VectorXd b(static_cast<Eigen::Index>(facets));
  for (std::size_t mask = 0; mask < facets; ++mask) {
    double dot = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = (mask >> i) & 1 ? 1.0 : -1.0;
      A(static_cast<Eigen::Index>(mask), i) = s;
      dot += s * center(i);
    }
    b(static_cast<Eigen::Index>(mask)) = radius + dot;
  }
  return Polytope(std::move(A), std::move(b));
}

VarId MilpModel::add_continuous(double lo, double hi, std::string name) {
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw EncodingError("add_continuous: bounds must be finite");
  if (lo > hi)
    throw EncodingError("add_continuous: lo > hi");
  vars_.push_back({lo, hi, false, std::move(name)});
  return VarId{static_cast<std::uint32_t>(vars_.size() - 1)};
}

VarId MilpModel::add_binary(std::string name) {
  vars_.push_back({0.0, 1.0, true, std::move(name)});
  ++num_binaries_;
  return VarId{static_cast<std::uint32_t>(vars_.size() - 1)};
}

void MilpModel::tighten_bounds(VarId v, double lo, double hi) {
  check_var(v);
  auto& info = vars_[v.index];
  info.lo = std::max(info.lo, lo);
  info.hi = std::min(info.hi, hi);
  if (info.lo > info.hi + 1e-12)
    throw EncodingError("tighten_bounds: empty interval for " + var_name(v));
}

void MilpModel::check_var(VarId v) const {
  if (!v.valid() || v.index >= vars_.size())
    throw EncodingError("variable id does not belong to this model");
}

void MilpModel::add_constraint(const LinExpr& expr, Sense sense, double rhs) {
  if (!std::isfinite(rhs))
    throw EncodingError("add_constraint: non-finite rhs");
  ModelRow row;
  row.sense = sense;
  row.rhs = rhs - expr.constant();
  for (const auto& t : expr.canonical_terms()) {
    check_var(t.var);
    row.coeffs.emplace_back(t.var.index, t.coef);
  }
  rows_.push_back(std::move(row));
}

void MilpModel::set_objective(const LinExpr& expr, ObjSense sense) {
  obj_terms_.clear();
  for (const auto& t : expr.canonical_terms()) {
    check_var(t.var);
    obj_terms_.push_back(t);
  }
  obj_constant_ = expr.constant();
  obj_sense_ = sense;
}

void MilpModel::register_sos1(std::vector<VarId> group) {
  for (const VarId v : group) {
    check_var(v);
    if (!vars_[v.index].binary)
      throw EncodingError("register_sos1: group member is not binary");
  }
  if (group.size() > 1)
    sos1_.push_back(std::move(group));
}

bool MilpModel::is_binary(VarId v) const {
  check_var(v);
  return vars_[v.index].binary;
}

Interval MilpModel::bounds(VarId v) const {
  check_var(v);
  return {vars_[v.index].lo, vars_[v.index].hi};
}

std::string MilpModel::var_name(VarId v) const {
  check_var(v);
  const auto& info = vars_[v.index];
  if (!info.name.empty())
    return info.name;
  return (info.binary ? "d" : "x") + std::to_string(v.index);
}

double MilpModel::eval(const LinExpr& expr,
                       const Eigen::VectorXd& assignment) const {
  double v = expr.constant();
  for (const auto& t : expr.raw_terms())
    v += t.coef * assignment(t.var.index);
  return v;
}

double MilpModel::max_violation(const Eigen::VectorXd& assignment) const {
  double worst = 0.0;
  for (const auto& row : rows_) {
    double act = 0.0;
    for (const auto& [j, c] : row.coeffs)
      act += c * assignment(j);
    double v = 0.0;
    switch (row.sense) {
    case Sense::Le: v = act - row.rhs; break;
    case Sense::Ge: v = row.rhs - act; break;
    case Sense::Eq: v = std::abs(act - row.rhs); break;
    }
    worst = std::max(worst, v);
  }
  for (std::uint32_t j = 0; j < vars_.size(); ++j) {
    worst = std::max(worst, vars_[j].lo - assignment(j));
    worst = std::max(worst, assignment(j) - vars_[j].hi);
  }
  return worst;
}

// --- encoders --------------------------------------------------------------

VarId add_relu(MilpModel& m, VarId x, Interval xb) {
  if (!xb.is_finite())
    throw EncodingError("add_relu: x must carry finite bounds");
  if (xb.lo > xb.hi)
    throw EncodingError("add_relu: empty bound interval");
  if (xb.lo >= 0.0)
    return x; // already nonnegative, t = x
  if (xb.hi <= 0.0)
    return m.add_continuous(0.0, 0.0); // dead unit, t = 0

  VarId t = m.add_continuous(0.0, xb.hi);
  VarId d = m.add_binary();
  // t >= x
  m.add_constraint(LinExpr::of(t).add(-1.0, x), Sense::Ge, 0.0);
  // t <= hi * d
  m.add_constraint(LinExpr::of(t).add(-xb.hi, d), Sense::Le, 0.0);
  // t <= x - lo*(1 - d)  <=>  t - x - lo*d <= -lo
  m.add_constraint(LinExpr::of(t).add(-1.0, x).add(-xb.lo, d), Sense::Le,
                   -xb.lo);
  return t;
}

namespace {

struct MaxPrep {
  std::vector<VarId> xs;
  std::vector<Interval> xb;
  double lo_max; // lower bound on the max
  double hi_max; // upper bound on the max
};

MaxPrep prune_for_max(std::span<const VarId> xs, std::span<const Interval> xb) {
  if (xs.empty())
    throw EncodingError("add_max: empty input list");
  if (xs.size() != xb.size())
    throw EncodingError("add_max: bounds list size mismatch");
  double lo_max = -std::numeric_limits<double>::infinity();
  double hi_max = lo_max;
  for (const auto& b : xb) {
    if (!b.is_finite())
      throw EncodingError("add_max: all bounds must be finite");
    lo_max = std::max(lo_max, b.lo);
    hi_max = std::max(hi_max, b.hi);
  }
  MaxPrep p;
  p.lo_max = lo_max;
  p.hi_max = hi_max;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xb[i].hi < lo_max)
      continue; // can never attain the max
    p.xs.push_back(xs[i]);
    p.xb.push_back(xb[i]);
  }
  return p;
}

} // namespace

VarId add_max(MilpModel& m, std::span<const VarId> xs,
              std::span<const Interval> xb) {
  MaxPrep p = prune_for_max(xs, xb);
  if (p.xs.size() == 1)
    return p.xs[0];

  VarId t = m.add_continuous(p.lo_max, p.hi_max);
  LinExpr pick;
  std::vector<VarId> group;
  for (std::size_t i = 0; i < p.xs.size(); ++i) {
    // umax_i = max_{j != i} hi_j
    double umax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.xs.size(); ++j)
      if (j != i)
        umax = std::max(umax, p.xb[j].hi);
    VarId d = m.add_binary();
    pick.add(1.0, d);
    group.push_back(d);
    // x_i <= t
    m.add_constraint(LinExpr::of(t).add(-1.0, p.xs[i]), Sense::Ge, 0.0);
    // t <= x_i + (umax_i - lo_i)(1 - d_i)
    const double gap = umax - p.xb[i].lo;
    m.add_constraint(LinExpr::of(t).add(-1.0, p.xs[i]).add(gap, d), Sense::Le,
                     gap);
  }
  m.add_constraint(pick, Sense::Eq, 1.0);
  m.register_sos1(std::move(group));
  return t;
}

VarId add_min(MilpModel& m, std::span<const VarId> xs,
              std::span<const Interval> xb) {
  // Mirror of add_max (min(x) = -max(-x)) written directly.
  if (xs.empty())
    throw EncodingError("add_min: empty input list");
  if (xs.size() != xb.size())
    throw EncodingError("add_min: bounds list size mismatch");
  double hi_min = std::numeric_limits<double>::infinity();
  double lo_min = hi_min;
  for (const auto& b : xb) {
    if (!b.is_finite())
      throw EncodingError("add_min: all bounds must be finite");
    hi_min = std::min(hi_min, b.hi);
    lo_min = std::min(lo_min, b.lo);
  }
  std::vector<VarId> keep;
  std::vector<Interval> keepb;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xb[i].lo > hi_min)
      continue;
    keep.push_back(xs[i]);
    keepb.push_back(xb[i]);
  }
  if (keep.size() == 1)
    return keep[0];

  VarId t = m.add_continuous(lo_min, hi_min);
  LinExpr pick;
  std::vector<VarId> group;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    double lmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < keep.size(); ++j)
      if (j != i)
        lmin = std::min(lmin, keepb[j].lo);
    VarId d = m.add_binary();
    pick.add(1.0, d);
    group.push_back(d);
    // t <= x_i
    m.add_constraint(LinExpr::of(t).add(-1.0, keep[i]), Sense::Le, 0.0);
    // t >= x_i - (hi_i - lmin_i)(1 - d_i)
    const double gap = keepb[i].hi - lmin;
    m.add_constraint(LinExpr::of(t).add(-1.0, keep[i]).add(-gap, d), Sense::Ge,
                     -gap);
  }
  m.add_constraint(pick, Sense::Eq, 1.0);
  m.register_sos1(std::move(group));
  return t;
}

void add_norm_le(MilpModel& m, std::span<const VarId> x,
                 const Eigen::VectorXd& center, VarId eps, Norm p) {
  if (static_cast<Eigen::Index>(x.size()) != center.size())
    throw EncodingError("add_norm_le: center dimension mismatch");
  if (p == Norm::Linf) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      // x_i - c_i <= eps ; c_i - x_i <= eps
      m.add_constraint(LinExpr::of(x[i]).add(-1.0, eps), Sense::Le, center(i));
      m.add_constraint(LinExpr::of(x[i]).add(1.0, eps), Sense::Ge, center(i));
    }
    return;
  }
  // p = 1: z_i >= |x_i - c_i|, sum z_i <= eps
  LinExpr sum;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Interval b = m.bounds(x[i]);
    const double zmax =
        std::max(std::abs(b.lo - center(i)), std::abs(b.hi - center(i)));
    VarId z = m.add_continuous(0.0, zmax);
    m.add_constraint(LinExpr::of(z).add(-1.0, x[i]), Sense::Ge, -center(i));
    m.add_constraint(LinExpr::of(z).add(1.0, x[i]), Sense::Ge, center(i));
    sum.add(1.0, z);
  }
  sum.add(-1.0, eps);
  m.add_constraint(sum, Sense::Le, 0.0);
}

void add_not_in_interior(MilpModel& m, std::span<const VarId> x,
                         const Polytope& S, std::span<const Interval> xb) {
  if (static_cast<Eigen::Index>(x.size()) != S.dim())
    throw EncodingError("add_not_in_interior: dimension mismatch");
  if (x.size() != xb.size())
    throw EncodingError("add_not_in_interior: bounds list size mismatch");
  for (const auto& b : xb)
    if (!b.is_finite())
      throw EncodingError("add_not_in_interior: bounds must be finite");

  // Residual variable per halfspace: e_i = a_i . x - b_i, bounded over the
  // box, then max_i(e_i) >= 0 excludes the interior.
  std::vector<VarId> evars;
  std::vector<Interval> ebounds;
  for (Eigen::Index i = 0; i < S.num_rows(); ++i) {
    double lo = -S.b()(i), hi = -S.b()(i);
    LinExpr def;
    for (Eigen::Index j = 0; j < S.dim(); ++j) {
      const double a = S.A()(i, j);
      if (a == 0.0)
        continue;
      def.add(a, x[j]);
      lo += std::min(a * xb[j].lo, a * xb[j].hi);
      hi += std::max(a * xb[j].lo, a * xb[j].hi);
    }
    VarId e = m.add_continuous(lo, hi);
    def.add(-1.0, e);
    m.add_constraint(def, Sense::Eq, S.b()(i));
    evars.push_back(e);
    ebounds.push_back({lo, hi});
  }
  VarId t = add_max(m, evars, ebounds);
  m.add_constraint(LinExpr::of(t), Sense::Ge, 0.0);
}

void add_not_in_ball(MilpModel& m, std::span<const VarId> x,
                     const NormBall& ball, std::span<const Interval> xb) {
  if (ball.p == Norm::L1 && ball.center.size() > 16)
    throw EncodingError("add_not_in_ball: p=1 refused above dimension 16");
  add_not_in_interior(m, x, ball.to_polytope(), xb);
}

} // namespace nflreach
