#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "nflreach/milp_model.hpp"

namespace nflreach {

enum class SolveStatus { Optimal, Infeasible, Unbounded, GapLimit, IterLimit };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double feas_tol = 1e-7;
  double gap_tol = 1e-6; // absolute incumbent/bound gap for optimality
  double int_tol = 1e-6;
  std::int64_t node_limit = -1;  // < 0: unlimited
  double time_limit_s = -1.0;    // < 0: unlimited; setting it trades
                                 // determinism of node counts for wall time
  std::int64_t lp_iter_limit = 500000; // per LP reoptimization
  // Objective value of a solution the caller already knows to be feasible
  // (minimize sense). Subtrees that cannot beat it are pruned; the proved
  // bound stays valid. +inf disables it.
  double cutoff = std::numeric_limits<double>::infinity();
};

struct SolveStats {
  std::int64_t nodes = 0;
  std::int64_t lp_iterations = 0;
  double wall_seconds = 0.0; // excluded from deterministic serializations
};

struct Solution {
  SolveStatus status = SolveStatus::Infeasible;
  // Incumbent objective in the model's sense; quiet NaN when none exists.
  double objective = std::numeric_limits<double>::quiet_NaN();
  // Proved bound on the optimum: lower bound for minimize, upper for
  // maximize. Valid whenever the status is not Infeasible.
  double bound = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd assignment; // structural variable values; empty if none
  SolveStats stats;

  bool has_incumbent() const { return assignment.size() > 0; }
};

class MilpSolverBackend {
public:
  virtual ~MilpSolverBackend() = default;
  virtual Solution solve(const MilpModel& model, const SolveOptions& opts) = 0;
};

// Reference solver: dual-simplex LP relaxations inside best-first branch and
// bound with depth-first plunging. Deterministic for fixed inputs as long as
// no time limit is set.
class BranchAndBoundSolver final : public MilpSolverBackend {
public:
  Solution solve(const MilpModel& model, const SolveOptions& opts) override;
};

// Escape hatch for large instances: writes the model in CPLEX-LP format,
// runs a user command, and reads back a plain-text solution file. The
// command template must contain {lp} and {sol} placeholders. Expected
// solution format (docs/formats.md): a status line, an optional bound line,
// then one "name value" pair per line.
class ExternalCommandSolver final : public MilpSolverBackend {
public:
  explicit ExternalCommandSolver(std::string command_template);
  Solution solve(const MilpModel& model, const SolveOptions& opts) override;

private:
  std::string command_template_;
};

Solution solve(const MilpModel& model, const SolveOptions& opts = {});

struct FeasibilityResult {
  enum class Kind { Feasible, Infeasible, Unknown };
  Kind kind = Kind::Unknown;
  Eigen::VectorXd witness; // set when feasible
  SolveStats stats;
};

// Feasibility-only solve; short-circuits on the first integral point.
FeasibilityResult check_feasible(const MilpModel& model,
                                 const SolveOptions& opts = {});

// Incremental branch-and-bound session over one model structure. The set of
// variables, rows, and coefficients is frozen at construction; row
// right-hand sides and variable bounds may be updated between solves, and
// each solve warm-starts the underlying simplex from the previous basis.
class BnbSession {
public:
  BnbSession(const MilpModel& model, const SolveOptions& opts);
  ~BnbSession();
  BnbSession(BnbSession&&) noexcept;
  BnbSession& operator=(BnbSession&&) noexcept;

  void set_row_rhs(std::size_t row, double rhs);
  void set_var_bounds(VarId v, double lo, double hi);
  // Known-feasible objective value used for pruning in the next solve.
  void set_cutoff(double cutoff);
  Solution solve();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace nflreach
