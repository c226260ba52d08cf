#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nflreach/milp_solver.hpp"
#include "nflreach/nfl.hpp"
#include "nflreach/sobol.hpp"

namespace nflreach {

struct GoalSet {
  Polytope poly;

  // LP feasibility over a large box; throws ConfigError when empty.
  void validate_nonempty() const;
};

struct ReachConfig {
  int horizon = 1;          // k
  int samples_per_step = 1; // n_samp
  Norm norm = Norm::Linf;
  double rel_tol = 1e-3;    // envelope tolerance
  std::int64_t rejection_cap = 100000;
  SolveOptions solver;

  void validate() const;
};

struct BallProvenance {
  std::int64_t sample_index = -1; // position in the global Sobol stream
  double incumbent = 0.0;
  double proved_bound = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  bool domain_fallback = false; // ball radius fell back to distance-to-D
  std::int64_t nodes = 0;
  std::int64_t lp_iterations = 0;
  double wall_seconds = 0.0; // timing sidecar only, never in result JSON
};

struct StepResult {
  int t = 0;
  std::vector<NormBall> balls;
  std::vector<BallProvenance> provenance; // aligned with balls
  std::vector<std::string> errors;
  double wall_seconds = 0.0;
};

struct BackreachResult {
  ReachConfig config;
  std::string dynamics_name;
  int state_dim = 0;
  Eigen::VectorXd domain_lo, domain_hi;
  Eigen::MatrixXd goal_A;
  Eigen::VectorXd goal_b;
  std::string config_hash;
  std::vector<StepResult> steps;

  std::size_t total_balls() const;
};

// Rejection sampling (global Sobol stream): draws points in D, simulates t
// true closed-loop steps, returns the first point whose image lies in O.
// Throws SamplingError when cap draws are exhausted.
Eigen::VectorXd sample_center(SobolSampler& sampler, const GoalSet& goal,
                              const NeuralFeedbackLoop& nfl, int t,
                              std::int64_t cap,
                              std::int64_t* accepted_index = nullptr);

struct MinBallResult {
  double proved_bound = 0.0; // the sound radius
  double incumbent = 0.0;
  Solution solution;
  bool infeasible = false; // no abstract rollout from D escapes int(goal)
};

// Smallest p-ball around x_d whose abstract t-step image can leave the goal
// interior: minimize eps s.t. ||x - x_d||_p <= eps, x_0 = fhat^t(x),
// x_0 not in int(goal). The proved lower bound is the sound radius.
MinBallResult min_ball_radius(const NeuralFeedbackLoop& nfl,
                              std::span<const PwlEnvelope> envelopes,
                              const BoundsCache& cache,
                              const Eigen::VectorXd& x_d, const GoalSet& goal,
                              int t, Norm p, const SolveOptions& opts);

// Largest p-ball around x inside the box [lo, hi]; the fallback radius when
// no abstract rollout escapes the goal.
double distance_to_box_boundary(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi);

// Whole pipeline: per t = 1..k encode the abstract rollout once, then
// sample/solve/record n_samp balls, storing proved-bound radii.
BackreachResult run_backreach(const NeuralFeedbackLoop& nfl,
                              const GoalSet& goal, const ReachConfig& config);

nlohmann::json result_to_json(const BackreachResult& r);
BackreachResult result_from_json(const nlohmann::json& j);
nlohmann::json timing_to_json(const BackreachResult& r);

std::string config_hash_hex(const nlohmann::json& canonical_config);

} // namespace nflreach
