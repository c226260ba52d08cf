#include "nflreach/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>

#include <Eigen/LU>

namespace nflreach::detail {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BoundedLp::BoundedLp(const MilpModel& m) {
  n_ = static_cast<int>(m.num_vars());
  m_ = static_cast<int>(m.num_rows());
  cols_.assign(n_, {});
  lo_.resize(n_ + m_);
  hi_.resize(n_ + m_);
  obj_ = Eigen::VectorXd::Zero(n_);

  for (int j = 0; j < n_; ++j) {
    const Interval b = m.bounds(VarId{static_cast<std::uint32_t>(j)});
    lo_[j] = b.lo;
    hi_[j] = b.hi;
  }
  row_sense_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    const ModelRow& row = m.rows()[i];
    row_sense_[i] = row.sense;
    for (const auto& [j, c] : row.coeffs)
      cols_[j].emplace_back(i, c);
    set_row_rhs(i, row.rhs);
  }

  const double sign = m.objective_sense() == ObjSense::Maximize ? -1.0 : 1.0;
  if (m.objective_sense() != ObjSense::Feasibility)
    for (const auto& t : m.objective_terms())
      obj_[t.var.index] = sign * t.coef;
}

void BoundedLp::set_bounds(int j, double lo, double hi) {
  lo_[j] = lo;
  hi_[j] = hi;
}

void BoundedLp::set_row_rhs(int row, double rhs) {
  const int j = n_ + row;
  switch (row_sense_[row]) {
  case Sense::Le:
    lo_[j] = -kInf;
    hi_[j] = rhs;
    break;
  case Sense::Ge:
    lo_[j] = rhs;
    hi_[j] = kInf;
    break;
  case Sense::Eq:
    lo_[j] = rhs;
    hi_[j] = rhs;
    break;
  }
}

void BoundedLp::set_objective(const Eigen::VectorXd& struct_costs) {
  obj_ = struct_costs;
}

DualSimplex::DualSimplex(BoundedLp lp, SimplexOptions opts)
    : lp_(std::move(lp)), opts_(opts) {}

void DualSimplex::invalidate() { basis_valid_ = false; }

double DualSimplex::bound_value(int j, bool at_lower) const {
  return at_lower ? lp_.lo_[j] : lp_.hi_[j];
}

double DualSimplex::nonbasic_value(int j) const {
  return bound_value(j, at_upper_[j] == 0);
}

void DualSimplex::cold_start() {
  const int n = lp_.n_, m = lp_.m_;
  basis_.resize(m);
  basis_pos_.assign(n + m, -1);
  at_upper_.assign(n + m, 0);
  for (int i = 0; i < m; ++i) {
    basis_[i] = n + i;
    basis_pos_[n + i] = i;
  }
  // B = -I for the all-logical basis.
  binv_ = RowMat::Identity(m, m) * -1.0;
  for (int j = 0; j < n; ++j) {
    // Dual-feasible rest position by cost sign.
    at_upper_[j] = lp_.obj_[j] < 0.0 ? 1 : 0;
    if (at_upper_[j] && !std::isfinite(lp_.hi_[j]))
      at_upper_[j] = 0;
    if (!at_upper_[j] && !std::isfinite(lp_.lo_[j]))
      at_upper_[j] = 1;
  }
  pivots_since_refactor_ = 0;
  basis_valid_ = true;
}

void DualSimplex::refactorize() {
  const int n = lp_.n_, m = lp_.m_;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int j = basis_[i];
    if (j >= n) {
      B(j - n, i) = -1.0;
    } else {
      for (const auto& [row, c] : lp_.cols_[j])
        B(row, i) = c;
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  if (dmax == 0.0 || diag.minCoeff() < 1e-13 * dmax)
    throw SolveError("numerically singular basis during refactorization "
                     "(pivot ratio " +
                     std::to_string(diag.minCoeff()) + "/" +
                     std::to_string(dmax) + ")");
  binv_ = lu.inverse();
  pivots_since_refactor_ = 0;
}

void DualSimplex::compute_beta() {
  const int n = lp_.n_, m = lp_.m_;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < n; ++j) {
    if (basis_pos_[j] >= 0)
      continue;
    const double v = nonbasic_value(j);
    if (v == 0.0)
      continue;
    for (const auto& [row, c] : lp_.cols_[j])
      rhs[row] -= c * v;
  }
  for (int i = 0; i < m; ++i) {
    const int j = n + i;
    if (basis_pos_[j] >= 0)
      continue;
    rhs[i] += nonbasic_value(j); // column is -e_i
  }
  beta_.noalias() = binv_ * rhs;
}

void DualSimplex::compute_duals() {
  const int n = lp_.n_, m = lp_.m_;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const int j = basis_[i];
    if (j < n && lp_.obj_[j] != 0.0)
      y.noalias() += lp_.obj_[j] * binv_.row(i).transpose();
  }
  dual_.resize(n + m);
  for (int j = 0; j < n; ++j) {
    if (basis_pos_[j] >= 0) {
      dual_[j] = 0.0;
      continue;
    }
    double v = lp_.obj_[j];
    for (const auto& [row, c] : lp_.cols_[j])
      v -= y[row] * c;
    dual_[j] = v;
  }
  for (int i = 0; i < m; ++i) {
    const int j = n + i;
    dual_[j] = basis_pos_[j] >= 0 ? 0.0 : y[i];
  }
}

void DualSimplex::fix_nonbasic_statuses() {
  const int total = lp_.num_cols();
  for (int j = 0; j < total; ++j) {
    if (basis_pos_[j] >= 0)
      continue;
    if (at_upper_[j] && !std::isfinite(lp_.hi_[j]))
      at_upper_[j] = 0;
    if (!at_upper_[j] && !std::isfinite(lp_.lo_[j]))
      at_upper_[j] = 1;
  }
}

void DualSimplex::assemble_values() {
  const int n = lp_.n_, m = lp_.m_;
  xval_.resize(n + m);
  for (int j = 0; j < n + m; ++j)
    if (basis_pos_[j] < 0)
      xval_[j] = nonbasic_value(j);
  for (int i = 0; i < m; ++i)
    xval_[basis_[i]] = beta_[i];
  obj_value_ = 0.0;
  for (int j = 0; j < n; ++j)
    if (lp_.obj_[j] != 0.0)
      obj_value_ += lp_.obj_[j] * xval_[j];
}

LpStatus DualSimplex::reoptimize() {
  const int n = lp_.n_, m = lp_.m_;
  if (m == 0) {
    // No rows: every variable sits on its cost-preferred bound.
    basis_.clear();
    basis_pos_.assign(n, -1);
    at_upper_.assign(n, 0);
    for (int j = 0; j < n; ++j)
      at_upper_[j] = lp_.obj_[j] < 0.0 ? 1 : 0;
    beta_.resize(0);
    binv_.resize(0, 0);
    for (int j = 0; j < n; ++j)
      if (lp_.lo_[j] > lp_.hi_[j])
        return LpStatus::Infeasible;
    assemble_values();
    return LpStatus::Optimal;
  }

  if (!basis_valid_)
    cold_start();
  else
    fix_nonbasic_statuses();

  // A variable whose bounds crossed makes the model trivially infeasible.
  for (int j = 0; j < n + m; ++j)
    if (lp_.lo_[j] > lp_.hi_[j] + opts_.feas_tol)
      return LpStatus::Infeasible;

  compute_duals();
  // Repair dual feasibility of resting positions where both bounds exist.
  for (int j = 0; j < n + m; ++j) {
    if (basis_pos_[j] >= 0 || lp_.lo_[j] == lp_.hi_[j])
      continue;
    if (dual_[j] > opts_.dual_tol && !at_upper_[j])
      continue;
    if (dual_[j] < -opts_.dual_tol && at_upper_[j])
      continue;
    if (dual_[j] > opts_.dual_tol && std::isfinite(lp_.lo_[j]))
      at_upper_[j] = 0;
    else if (dual_[j] < -opts_.dual_tol && std::isfinite(lp_.hi_[j]))
      at_upper_[j] = 1;
  }

  bool bland = false;
  int degenerate_run = 0;
  std::int64_t iters = 0;
  int singular_retries = 0;
  int cold_restarts = 0;

  for (;;) {
    if (iters >= opts_.iter_limit)
      return LpStatus::IterLimit;
    if (pivots_since_refactor_ >= opts_.refactor_every || need_refactor_) {
      need_refactor_ = false;
      try {
        refactorize();
      } catch (const SolveError&) {
        // Accumulated drift let a near-dependent column set into the basis;
        // the all-logical basis is always invertible, so restart from it.
        if (++cold_restarts > 3)
          throw;
        if (std::getenv("NFLREACH_SPX_LOG"))
          std::cerr << "[spx] cold restart " << cold_restarts << " at iter "
                    << iters << "\n";
        cold_start();
      }
      compute_duals();
    }
    compute_beta();

    // Leaving variable: most violated basic bound.
    int r = -1;
    double worst = opts_.feas_tol;
    bool leave_upper = false;
    for (int i = 0; i < m; ++i) {
      const int j = basis_[i];
      const double below = lp_.lo_[j] - beta_[i];
      const double above = beta_[i] - lp_.hi_[j];
      const double v = std::max(below, above);
      if (v <= worst)
        continue;
      if (bland) {
        if (r >= 0 && basis_[r] < j)
          continue;
        r = i;
        leave_upper = above > below;
        continue;
      }
      worst = v;
      r = i;
      leave_upper = above > below;
    }
    if (r < 0) {
      assemble_values();
      return LpStatus::Optimal;
    }
    if (std::getenv("NFLREACH_SPX_LOG") && iters > 0 && iters % 2000 == 0)
      std::cerr << "[spx] " << iters << " iters this call, bland=" << bland
                << " worst=" << worst << " obj~" << obj_value_ << "\n";

    const int leaving = basis_[r];
    const Eigen::VectorXd rho = binv_.row(r).transpose();

    // Pivot row entries for every nonbasic column.
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n + m);
    for (int j = 0; j < n; ++j) {
      if (basis_pos_[j] >= 0)
        continue;
      double a = 0.0;
      for (const auto& [row, c] : lp_.cols_[j])
        a += rho[row] * c;
      alpha[j] = a;
    }
    for (int i = 0; i < m; ++i)
      if (basis_pos_[n + i] < 0)
        alpha[n + i] = -rho[i];

    // Entering variable by a two-pass dual ratio test. w is the row
    // direction oriented so eligible columns have w > 0 at lower, w < 0 at
    // upper. The second pass prefers the largest |w| among near-minimal
    // ratios, which keeps pivots away from numerically tiny entries.
    int q = -1;
    double min_ratio = kInf;
    const auto eligible = [&](int j, double& w_out) {
      if (basis_pos_[j] >= 0 || lp_.lo_[j] == lp_.hi_[j])
        return false;
      const double w = leave_upper ? alpha[j] : -alpha[j];
      const bool low = at_upper_[j] == 0;
      if (low ? w <= opts_.pivot_tol : w >= -opts_.pivot_tol)
        return false;
      w_out = w;
      return true;
    };
    for (int j = 0; j < n + m; ++j) {
      double w;
      if (!eligible(j, w))
        continue;
      min_ratio = std::min(min_ratio, std::max(0.0, dual_[j] / w));
    }
    if (min_ratio == kInf) {
      // The violated row cannot be repaired: primal infeasible.
      assemble_values();
      return LpStatus::Infeasible;
    }
    const double ratio_slack = 1e-9 + 1e-7 * min_ratio;
    double best_w = 0.0;
    for (int j = 0; j < n + m; ++j) {
      double w;
      if (!eligible(j, w))
        continue;
      const double ratio = std::max(0.0, dual_[j] / w);
      if (ratio > min_ratio + ratio_slack)
        continue;
      if (bland) {
        if (q < 0 || j < q)
          q = j;
        continue;
      }
      if (q < 0 || std::abs(w) > std::abs(best_w) + 1e-12 ||
          (std::abs(w) >= std::abs(best_w) - 1e-12 && j < q)) {
        q = j;
        best_w = w;
      }
    }
    const double alpha_q = alpha[q];

    if (min_ratio <= 1e-12) {
      if (++degenerate_run > 100)
        bland = true;
    } else {
      degenerate_run = 0;
    }

    // Pivot column through the basis inverse.
    Eigen::VectorXd acol = Eigen::VectorXd::Zero(m);
    if (q < n) {
      Eigen::VectorXd dense = Eigen::VectorXd::Zero(m);
      for (const auto& [row, c] : lp_.cols_[q])
        dense[row] = c;
      acol.noalias() = binv_ * dense;
    } else {
      acol = -binv_.col(q - n);
    }
    const double piv = acol[r];
    if (std::abs(piv - alpha_q) > 1e-9 * (1.0 + std::abs(piv)))
      need_refactor_ = true; // mild drift: rebuild at the next iteration
    if (std::abs(piv) < 0.5 * opts_.pivot_tol ||
        std::abs(piv - alpha_q) > 1e-6 * (1.0 + std::abs(piv))) {
      // Inverse has drifted; rebuild and retry this iteration.
      if (++singular_retries > 3)
        throw SolveError("simplex basis inverse unstable (pivot " +
                         std::to_string(piv) + ")");
      try {
        refactorize();
      } catch (const SolveError&) {
        if (++cold_restarts > 3)
          throw;
        cold_start();
      }
      compute_duals();
      continue;
    }
    singular_retries = 0;

    binv_.row(r) /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == r)
        continue;
      const double f = acol[i];
      if (f != 0.0)
        binv_.row(i) -= f * binv_.row(r);
    }

    at_upper_[leaving] = leave_upper ? 1 : 0;
    basis_pos_[leaving] = -1;
    basis_[r] = q;
    basis_pos_[q] = r;

    // Reduced costs after the pivot: d_q becomes 0, others shift by the
    // dual step along the pivot row.
    const double step = dual_[q] / alpha_q;
    if (step != 0.0) {
      for (int j = 0; j < n + m; ++j) {
        if (basis_pos_[j] >= 0 || j == q)
          continue;
        dual_[j] -= step * alpha[j];
      }
    }
    dual_[leaving] = -step;
    dual_[q] = 0.0;

    ++pivots_since_refactor_;
    ++iters;
    ++iters_total_;
  }
}

} // namespace nflreach::detail
