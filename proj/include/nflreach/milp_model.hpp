#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nflreach/errors.hpp"

namespace nflreach {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool is_finite() const;
  Interval intersect(const Interval& o) const;
  Interval hull(const Interval& o) const;
};

enum class Norm { L1, Linf };

// Handle into one model's variable table. Only meaningful for the model
// that issued it.
struct VarId {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t index = kInvalid;

  bool valid() const { return index != kInvalid; }
  friend bool operator==(const VarId&, const VarId&) = default;
};

struct LinTerm {
  double coef = 0.0;
  VarId var;
};

// Linear expression sum(coef_i * x_i) + constant. Duplicate variables are
// merged when the expression is canonicalized.
class LinExpr {
public:
  LinExpr() = default;
  explicit LinExpr(double constant) : constant_(constant) {}

  static LinExpr of(VarId v, double coef = 1.0);

  LinExpr& add(double coef, VarId v);
  LinExpr& add_constant(double c);

  const std::vector<LinTerm>& raw_terms() const { return terms_; }
  double constant() const { return constant_; }

  // Sorted by variable index, duplicates merged, zero coefficients dropped.
  std::vector<LinTerm> canonical_terms() const;

private:
  std::vector<LinTerm> terms_;
  double constant_ = 0.0;
};

enum class Sense { Le, Ge, Eq };
enum class ObjSense { Minimize, Maximize, Feasibility };

// Halfspace intersection {x | Ax <= b}.
class Polytope {
public:
  Polytope(Eigen::MatrixXd A, Eigen::VectorXd b);
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  Eigen::Index dim() const { return A_.cols(); }
  Eigen::Index num_rows() const { return A_.rows(); }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }

  // max_i (a_i . x - b_i); <= 0 means x is in the closed set,
  // < 0 means x is in the interior.
  double max_residual(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  bool interior_contains(const Eigen::VectorXd& x, double tol = 0.0) const;

private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

// {x | ||x - center||_p <= radius}, p in {1, inf}. radius 0 is a point.
struct NormBall {
  Eigen::VectorXd center;
  double radius = 0.0;
  Norm p = Norm::Linf;

  double distance(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  // Facet representation: 2n rows for p=inf, 2^n rows for p=1.
  Polytope to_polytope() const;
};

struct ModelRow {
  std::vector<std::pair<std::uint32_t, double>> coeffs; // sorted by column
  Sense sense = Sense::Le;
  double rhs = 0.0;
};

// Mixed-integer linear program under construction: continuous variables with
// finite bounds, binary variables, linear rows, and one linear objective.
// Mutable while being built, then treated as immutable by solvers.
class MilpModel {
public:
  VarId add_continuous(double lo, double hi, std::string name = {});
  VarId add_binary(std::string name = {});

  // Intersects with the existing bounds.
  void tighten_bounds(VarId v, double lo, double hi);

  void add_constraint(const LinExpr& expr, Sense sense, double rhs);
  void set_objective(const LinExpr& expr, ObjSense sense);

  std::size_t num_vars() const { return vars_.size(); }
  std::size_t num_binaries() const { return num_binaries_; }
  std::size_t num_rows() const { return rows_.size(); }

  bool is_binary(VarId v) const;
  Interval bounds(VarId v) const;
  std::string var_name(VarId v) const; // auto x<i> / d<i> when unnamed
  const std::vector<ModelRow>& rows() const { return rows_; }
  const std::vector<LinTerm>& objective_terms() const { return obj_terms_; }
  double objective_constant() const { return obj_constant_; }
  ObjSense objective_sense() const { return obj_sense_; }

  double eval(const LinExpr& expr, const Eigen::VectorXd& assignment) const;
  // Largest absolute constraint violation of an assignment.
  double max_violation(const Eigen::VectorXd& assignment) const;

  // Indicator groups carrying sum(d_i) = 1; encoders register them so the
  // solver can branch on whole groups.
  void register_sos1(std::vector<VarId> group);
  const std::vector<std::vector<VarId>>& sos1_groups() const { return sos1_; }

  // CPLEX-LP text export; keyword set documented in docs/formats.md.
  void write_lp(std::ostream& os) const;

private:
  struct VarInfo {
    double lo, hi;
    bool binary;
    std::string name;
  };
  void check_var(VarId v) const;

  std::vector<VarInfo> vars_;
  std::vector<ModelRow> rows_;
  std::vector<std::vector<VarId>> sos1_;
  std::vector<LinTerm> obj_terms_;
  double obj_constant_ = 0.0;
  ObjSense obj_sense_ = ObjSense::Feasibility;
  std::size_t num_binaries_ = 0;
};

// --- big-M encoders -------------------------------------------------------
//
// All big-M constants are derived from the explicit bounds passed in; there
// is no global fallback M. Bounds may be tighter than the variable bounds
// stored in the model as long as they are valid over the feasible set.

// t = max(x, 0). Stable cases (lo >= 0, hi <= 0) create no binary; the
// active case uses one binary d with
//   t >= x,  t <= hi*d,  t <= x - lo*(1-d)   (t >= 0 via its bound).
VarId add_relu(MilpModel& m, VarId x, Interval xb);

// t = max_i(x_i). Inputs whose upper bound is below the largest lower bound
// never attain the max and are pruned first. A single surviving input is
// returned directly. Otherwise one binary per survivor with
//   x_i <= t <= x_i + (umax_i - lo_i)(1 - d_i),  sum d_i = 1,
// where umax_i = max_{j != i} hi_j.
VarId add_max(MilpModel& m, std::span<const VarId> xs,
              std::span<const Interval> xb);

// t = min_i(x_i), the mirror of add_max.
VarId add_min(MilpModel& m, std::span<const VarId> xs,
              std::span<const Interval> xb);

// ||x - center||_p <= eps. p=inf: -eps <= x_i - c_i <= eps. p=1: auxiliary
// z_i with -z_i <= x_i - c_i <= z_i and sum z_i <= eps. p=2 is unsupported.
void add_norm_le(MilpModel& m, std::span<const VarId> x,
                 const Eigen::VectorXd& center, VarId eps, Norm p);

// x outside the interior of S: max_i(a_i.x - b_i) >= 0, with the max built
// through add_max over rows bounded via the per-dimension box.
void add_not_in_interior(MilpModel& m, std::span<const VarId> x,
                         const Polytope& S, std::span<const Interval> xb);

// x outside the interior of a norm ball, via the ball's facet polytope.
// p=1 is refused above dimension 16 (2^n facets).
void add_not_in_ball(MilpModel& m, std::span<const VarId> x,
                     const NormBall& ball, std::span<const Interval> xb);

} // namespace nflreach
