#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "json.hpp"

#include "nflreach/backreach.hpp"
#include "nflreach/nfl.hpp"

namespace nflreach {

struct StartSet {
  Polytope poly;
};

struct CheckVerdict {
  bool subset = false;
  Eigen::VectorXd witness; // set when not a subset; revalidated directly
  SolveStats stats;
};

// Is every start state inside the union of stored balls? Encodes Cx <= d
// plus one ball-interior exclusion per stored ball and asks for a
// counterexample; infeasible means subset. Balls that cannot intersect the
// start set's bounding box are dropped up front (their exclusion holds for
// every candidate point). Witnesses are re-evaluated with direct arithmetic
// before being returned.
CheckVerdict check_goal_reaching(const StartSet& start,
                                 const BackreachResult& result,
                                 const SolveOptions& opts = {});

struct CoverageCell {
  int t = 0; // 0 marks the union row
  std::int64_t accepted = 0;
  std::int64_t covered = 0;
  bool defined = false;
  double fraction = 0.0; // valid only when defined
};

struct CoverageReport {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<CoverageCell> per_step;
  CoverageCell union_cell;
};

// Monte-Carlo volume fraction of the true backward sets captured by the ball
// unions: per step, uniform points in D are kept when their true t-step
// image lies in the goal, and the kept points are tested against the step's
// balls. The union row pools kept points across steps against all balls.
CoverageReport estimate_coverage(const NeuralFeedbackLoop& nfl,
                                 const GoalSet& goal,
                                 const BackreachResult& result,
                                 std::int64_t samples, std::uint64_t seed);

nlohmann::json verdict_to_json(const CheckVerdict& v);
nlohmann::json coverage_to_json(const CoverageReport& r);
// One header line plus one row per report: n_samp, per-step fractions,
// union fraction; undefined cells print NA.
void coverage_to_csv(const CoverageReport& r, int n_samp, std::ostream& os,
                     bool header);

} // namespace nflreach
