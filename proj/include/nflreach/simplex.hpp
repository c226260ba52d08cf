#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nflreach/milp_model.hpp"

namespace nflreach::detail {

struct SimplexOptions {
  double feas_tol = 1e-7;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-7; // ratio-test eligibility; keeps the inverse stable
  int refactor_every = 1000;
  std::int64_t iter_limit = 500000;
};

enum class LpStatus { Optimal, Infeasible, IterLimit, Singular };

// LP working form for one MilpModel: columns are the structural variables
// followed by one logical (row activity) column per row,
//   A x - r = 0,    r_i bounded by the row sense and rhs.
// Binary variables are relaxed to [0, 1]; branching reimposes integrality
// through set_bounds.
class BoundedLp {
public:
  explicit BoundedLp(const MilpModel& m);

  int num_struct() const { return n_; }
  int num_rows() const { return m_; }
  int num_cols() const { return n_ + m_; }

  double lower(int j) const { return lo_[j]; }
  double upper(int j) const { return hi_[j]; }
  void set_bounds(int j, double lo, double hi);
  // Moves the logical bounds of a row to a new rhs, keeping its sense.
  void set_row_rhs(int row, double rhs);
  void set_objective(const Eigen::VectorXd& struct_costs);

  const std::vector<std::pair<int, double>>& column(int j) const {
    return cols_[j];
  }
  double cost(int j) const { return j < n_ ? obj_[j] : 0.0; }

private:
  friend class DualSimplex;
  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_; // structural only
  std::vector<Sense> row_sense_;
  Eigen::VectorXd obj_; // structural costs, minimize
  Eigen::VectorXd lo_, hi_; // size n_ + m_
};

// Bounded-variable dual simplex with a dense basis inverse. The all-logical
// basis is dual feasible for any objective once nonbasic variables sit on the
// bound matching their cost sign, so no primal phase is ever needed; after
// bound changes (branching, rhs updates) the current basis stays dual
// feasible and reoptimize() continues from it.
class DualSimplex {
public:
  DualSimplex(BoundedLp lp, SimplexOptions opts = {});

  BoundedLp& lp() { return lp_; }
  const BoundedLp& lp() const { return lp_; }

  // Call after mutating bounds/rhs. Warm-starts from the current basis.
  LpStatus reoptimize();
  void invalidate(); // force a cold start on the next reoptimize

  double objective() const { return obj_value_; }
  // Values for all columns (structural then logical).
  const Eigen::VectorXd& values() const { return xval_; }
  Eigen::VectorXd structural_values() const {
    return xval_.head(lp_.num_struct());
  }
  std::int64_t iterations_total() const { return iters_total_; }

private:
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  void cold_start();
  void refactorize(); // rebuild binv_ from basis_; throws SolveError if singular
  void compute_beta();
  void compute_duals();
  void fix_nonbasic_statuses();
  double bound_value(int j, bool at_lower) const;
  double nonbasic_value(int j) const;
  void assemble_values();

  BoundedLp lp_;
  SimplexOptions opts_;

  bool basis_valid_ = false;
  std::vector<int> basis_;        // column basic in each row slot
  std::vector<int> basis_pos_;    // column -> row slot or -1
  std::vector<std::uint8_t> at_upper_; // nonbasic rests at upper bound
  RowMat binv_;
  Eigen::VectorXd beta_;  // basic values
  Eigen::VectorXd dual_;  // reduced costs, all columns
  Eigen::VectorXd xval_;
  double obj_value_ = 0.0;
  std::int64_t iters_total_ = 0;
  int pivots_since_refactor_ = 0;
  bool need_refactor_ = false; // set when pivot row/column views disagree
};

} // namespace nflreach::detail
