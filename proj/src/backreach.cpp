#include "nflreach/backreach.hpp"

#include <chrono>
#include <cmath>

namespace nflreach {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Interval> final_bounds(const BoundsCache& cache, int t) {
  return cache.steps[t - 1].state_out;
}

double box_diameter(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                    Norm p) {
  if (p == Norm::Linf)
    return (hi - lo).maxCoeff();
  return (hi - lo).sum();
}

Eigen::VectorXd to_vec(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json from_vec(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    j.push_back(v(i));
  return j;
}

nlohmann::json from_mat(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    j.push_back(from_vec(m.row(i).transpose()));
  return j;
}

Eigen::MatrixXd to_mat(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = j[i][k].get<double>();
  return m;
}

} // namespace

void GoalSet::validate_nonempty() const {
  MilpModel m;
  std::vector<VarId> xs;
  for (Eigen::Index i = 0; i < poly.dim(); ++i)
    xs.push_back(m.add_continuous(-1e7, 1e7));
  for (Eigen::Index r = 0; r < poly.num_rows(); ++r) {
    LinExpr e;
    for (Eigen::Index j = 0; j < poly.dim(); ++j)
      if (poly.A()(r, j) != 0.0)
        e.add(poly.A()(r, j), xs[j]);
    m.add_constraint(e, Sense::Le, poly.b()(r));
  }
  if (check_feasible(m).kind != FeasibilityResult::Kind::Feasible)
    throw ConfigError("goal set is empty");
}

void ReachConfig::validate() const {
  if (horizon < 1)
    throw ConfigError("reach config: horizon must be >= 1");
  if (samples_per_step < 1)
    throw ConfigError("reach config: samples_per_step must be >= 1");
  if (rejection_cap < 1)
    throw ConfigError("reach config: rejection_cap must be >= 1");
  if (!(rel_tol > 0.0))
    throw ConfigError("reach config: rel_tol must be positive");
}

Eigen::VectorXd sample_center(SobolSampler& sampler, const GoalSet& goal,
                              const NeuralFeedbackLoop& nfl, int t,
                              std::int64_t cap,
                              std::int64_t* accepted_index) {
  if (cap < 1)
    throw ConfigError("sample_center: cap must be >= 1");
  for (std::int64_t i = 0; i < cap; ++i) {
    const std::int64_t idx = static_cast<std::int64_t>(sampler.index());
    const Eigen::VectorXd x = SobolSampler::map_to_box(
        sampler.next(), nfl.domain_lo, nfl.domain_hi);
    if (goal.poly.contains(simulate(nfl, x, t), 1e-12)) {
      if (accepted_index)
        *accepted_index = idx;
      return x;
    }
  }
  throw SamplingError(
      "rejection sampling exhausted " + std::to_string(cap) +
      " draws at step " + std::to_string(t) +
      "; the backward reachable set may be empty or tiny within D");
}

double distance_to_box_boundary(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi) {
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    d = std::min({d, x(i) - lo(i), hi(i) - x(i)});
  return std::max(0.0, d);
}

namespace {

// Feasible objective value for the min-ball MILP: the distance from the
// center to any point of D whose true t-step rollout strictly leaves the
// goal interior (the true trajectory is one branch of the abstraction, so
// such a point is feasible). Deterministic ray scan toward the corners and
// face centers of D; +inf when no candidate escapes.
double escape_cutoff(const NeuralFeedbackLoop& nfl, const GoalSet& goal, int t,
                     const Eigen::VectorXd& center, Norm p) {
  const Eigen::Index n = center.size();
  std::vector<Eigen::VectorXd> targets;
  if (n <= 8) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Eigen::VectorXd c(n);
      for (Eigen::Index i = 0; i < n; ++i)
        c(i) = (mask >> i) & 1 ? nfl.domain_hi(i) : nfl.domain_lo(i);
      targets.push_back(std::move(c));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd mid = 0.5 * (nfl.domain_lo + nfl.domain_hi);
    mid(i) = nfl.domain_lo(i);
    targets.push_back(mid);
    mid(i) = nfl.domain_hi(i);
    targets.push_back(mid);
  }

  constexpr double kFractions[] = {0.125, 0.25, 0.375, 0.5, 0.7, 0.85, 1.0};
  double best = std::numeric_limits<double>::infinity();
  NormBall probe{center, 0.0, p};
  for (const auto& target : targets) {
    for (const double f : kFractions) {
      const Eigen::VectorXd x = center + f * (target - center);
      if (goal.poly.max_residual(simulate(nfl, x, t)) < 1e-7)
        continue;
      best = std::min(best, probe.distance(x));
      break; // farther points on this ray only cost more
    }
  }
  return best;
}

} // namespace

MinBallResult min_ball_radius(const NeuralFeedbackLoop& nfl,
                              std::span<const PwlEnvelope> envelopes,
                              const BoundsCache& cache,
                              const Eigen::VectorXd& x_d, const GoalSet& goal,
                              int t, Norm p, const SolveOptions& opts) {
  MilpModel m;
  const RolloutVars vars = encode_rollout(m, nfl, envelopes, t, cache);
  const double diam = box_diameter(nfl.domain_lo, nfl.domain_hi, p);
  const VarId eps = m.add_continuous(0.0, diam);
  add_norm_le(m, vars.initial(), x_d, eps, p);
  const std::vector<Interval> fb = final_bounds(cache, t);
  add_not_in_interior(m, vars.final_state(), goal.poly, fb);
  m.set_objective(LinExpr::of(eps), ObjSense::Minimize);

  SolveOptions run_opts = opts;
  run_opts.cutoff = std::min(run_opts.cutoff,
                             escape_cutoff(nfl, goal, t, x_d, p));
  MinBallResult r;
  r.solution = solve(m, run_opts);
  if (r.solution.status == SolveStatus::Infeasible) {
    r.infeasible = true;
    return r;
  }
  r.proved_bound = std::max(0.0, r.solution.bound);
  r.incumbent = r.solution.objective;
  return r;
}

std::size_t BackreachResult::total_balls() const {
  std::size_t n = 0;
  for (const auto& s : steps)
    n += s.balls.size();
  return n;
}

BackreachResult run_backreach(const NeuralFeedbackLoop& nfl,
                              const GoalSet& goal, const ReachConfig& config) {
  config.validate();
  nfl.validate();
  goal.validate_nonempty();
  if (goal.poly.dim() != nfl.dynamics.state_dim)
    throw ConfigError("goal dimension does not match the state dimension");

  const Abstraction abs =
      prepare_abstraction(nfl, config.horizon, config.rel_tol);

  BackreachResult result;
  result.config = config;
  result.dynamics_name = nfl.dynamics.name;
  result.state_dim = nfl.dynamics.state_dim;
  result.domain_lo = nfl.domain_lo;
  result.domain_hi = nfl.domain_hi;
  result.goal_A = goal.poly.A();
  result.goal_b = goal.poly.b();

  SobolSampler sampler(nfl.dynamics.state_dim); // run-global stream
  const int n = nfl.dynamics.state_dim;
  const double diam = box_diameter(nfl.domain_lo, nfl.domain_hi, config.norm);

  for (int t = 1; t <= config.horizon; ++t) {
    const auto step_start = Clock::now();
    StepResult step;
    step.t = t;

    // Encode the abstract rollout once per step; per-sample ball rows only
    // move their right-hand sides (the center), so the branch-and-bound
    // session keeps its warm basis across samples.
    MilpModel m;
    const RolloutVars vars = encode_rollout(m, nfl, abs.envelopes, t, abs.cache);
    const VarId eps = m.add_continuous(0.0, diam);
    const std::size_t ball_rows_base = m.num_rows();
    if (config.norm == Norm::Linf) {
      for (int i = 0; i < n; ++i) {
        m.add_constraint(LinExpr::of(vars.initial()[i]).add(-1.0, eps),
                         Sense::Le, 0.0);
        m.add_constraint(LinExpr::of(vars.initial()[i]).add(1.0, eps),
                         Sense::Ge, 0.0);
      }
    } else {
      LinExpr sum;
      for (int i = 0; i < n; ++i) {
        // Center-independent z bounds so only the rhs moves between samples.
        const double zmax = nfl.domain_hi(i) - nfl.domain_lo(i);
        const VarId z = m.add_continuous(0.0, zmax);
        m.add_constraint(LinExpr::of(z).add(-1.0, vars.initial()[i]),
                         Sense::Ge, 0.0);
        m.add_constraint(LinExpr::of(z).add(1.0, vars.initial()[i]), Sense::Ge,
                         0.0);
        sum.add(1.0, z);
      }
      sum.add(-1.0, eps);
      m.add_constraint(sum, Sense::Le, 0.0);
    }
    add_not_in_interior(m, vars.final_state(), goal.poly,
                        final_bounds(abs.cache, t));
    m.set_objective(LinExpr::of(eps), ObjSense::Minimize);

    BnbSession session(m, config.solver);

    for (int j = 0; j < config.samples_per_step; ++j) {
      Eigen::VectorXd center;
      std::int64_t sample_index = -1;
      try {
        center = sample_center(sampler, goal, nfl, t, config.rejection_cap,
                               &sample_index);
      } catch (const SamplingError& e) {
        step.errors.emplace_back(e.what());
        break; // the deterministic stream would keep failing at this step
      }

      // Point the ball rows at the new center.
      if (config.norm == Norm::Linf) {
        for (int i = 0; i < n; ++i) {
          session.set_row_rhs(ball_rows_base + 2 * i, center(i));
          session.set_row_rhs(ball_rows_base + 2 * i + 1, center(i));
        }
      } else {
        for (int i = 0; i < n; ++i) {
          session.set_row_rhs(ball_rows_base + 2 * i, -center(i));
          session.set_row_rhs(ball_rows_base + 2 * i + 1, center(i));
        }
      }

      const auto ball_start = Clock::now();
      session.set_cutoff(
          escape_cutoff(nfl, goal, t, center, config.norm));
      Solution sol;
      try {
        sol = session.solve();
      } catch (const std::exception& e) {
        step.errors.emplace_back("sample " + std::to_string(j) +
                                 " solver error: " + e.what());
        continue;
      }

      BallProvenance prov;
      prov.sample_index = sample_index;
      prov.status = sol.status;
      prov.nodes = sol.stats.nodes;
      prov.lp_iterations = sol.stats.lp_iterations;
      prov.wall_seconds = seconds_since(ball_start);

      const double dist_to_d =
          distance_to_box_boundary(center, nfl.domain_lo, nfl.domain_hi);
      double radius;
      if (sol.status == SolveStatus::Infeasible) {
        // Nothing in the encoded region escapes the goal interior: the whole
        // of D backreaches, so grow the ball to the domain boundary.
        radius = dist_to_d;
        prov.domain_fallback = true;
        prov.incumbent = radius;
        prov.proved_bound = radius;
      } else {
        prov.incumbent = sol.objective;
        prov.proved_bound = std::max(0.0, sol.bound);
        // The encoding certifies membership only inside D; keep the ball
        // within it.
        radius = std::min(prov.proved_bound, dist_to_d);
      }
      step.balls.push_back(NormBall{center, radius, config.norm});
      step.provenance.push_back(std::move(prov));
    }

    if (step.balls.empty())
      step.errors.emplace_back("step " + std::to_string(t) +
                               ": no balls computed; storing an empty union");
    step.wall_seconds = seconds_since(step_start);
    result.steps.push_back(std::move(step));
  }

  result.config_hash = config_hash_hex(result_to_json(result)["config"]);
  return result;
}

std::string config_hash_hex(const nlohmann::json& canonical_config) {
  const std::string s = canonical_config.dump();
  std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

const char* norm_name(Norm p) { return p == Norm::Linf ? "inf" : "l1"; }

Norm norm_from_name(const std::string& s) {
  if (s == "inf")
    return Norm::Linf;
  if (s == "l1")
    return Norm::L1;
  throw ConfigError("unknown norm '" + s + "'");
}

nlohmann::json config_to_json(const ReachConfig& c) {
  return nlohmann::json{
      {"horizon", c.horizon},
      {"samples_per_step", c.samples_per_step},
      {"norm", norm_name(c.norm)},
      {"rel_tol", c.rel_tol},
      {"rejection_cap", c.rejection_cap},
      {"solver",
       {{"feas_tol", c.solver.feas_tol},
        {"gap_tol", c.solver.gap_tol},
        {"int_tol", c.solver.int_tol},
        {"node_limit", c.solver.node_limit},
        {"time_limit_s", c.solver.time_limit_s}}}};
}

ReachConfig config_from_json(const nlohmann::json& j) {
  ReachConfig c;
  c.horizon = j.at("horizon").get<int>();
  c.samples_per_step = j.at("samples_per_step").get<int>();
  c.norm = norm_from_name(j.at("norm").get<std::string>());
  c.rel_tol = j.at("rel_tol").get<double>();
  c.rejection_cap = j.at("rejection_cap").get<std::int64_t>();
  const auto& s = j.at("solver");
  c.solver.feas_tol = s.at("feas_tol").get<double>();
  c.solver.gap_tol = s.at("gap_tol").get<double>();
  c.solver.int_tol = s.at("int_tol").get<double>();
  c.solver.node_limit = s.at("node_limit").get<std::int64_t>();
  c.solver.time_limit_s = s.at("time_limit_s").get<double>();
  return c;
}

double json_finite(const nlohmann::json& j) {
  if (j.is_null())
    return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

nlohmann::json finite_json(double v) {
  if (std::isnan(v))
    return nullptr;
  return v;
}

} // namespace

nlohmann::json result_to_json(const BackreachResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    nlohmann::json balls = nlohmann::json::array();
    for (std::size_t i = 0; i < s.balls.size(); ++i) {
      const auto& b = s.balls[i];
      const auto& p = s.provenance[i];
      balls.push_back(
          {{"center", from_vec(b.center)},
           {"radius", b.radius},
           {"p", norm_name(b.p)},
           {"provenance",
            {{"sample_index", p.sample_index},
             {"incumbent", finite_json(p.incumbent)},
             {"proved_bound", p.proved_bound},
             {"status", to_string(p.status)},
             {"domain_fallback", p.domain_fallback},
             {"nodes", p.nodes},
             {"lp_iterations", p.lp_iterations}}}});
    }
    steps.push_back({{"t", s.t},
                     {"balls", std::move(balls)},
                     {"errors", s.errors}});
  }
  return nlohmann::json{{"version", 1},
                        {"config", config_to_json(r.config)},
                        {"config_hash", r.config_hash},
                        {"dynamics", r.dynamics_name},
                        {"state_dim", r.state_dim},
                        {"domain",
                         {{"lower", from_vec(r.domain_lo)},
                          {"upper", from_vec(r.domain_hi)}}},
                        {"goal", {{"A", from_mat(r.goal_A)},
                                  {"b", from_vec(r.goal_b)}}},
                        {"steps", std::move(steps)}};
}

BackreachResult result_from_json(const nlohmann::json& j) {
  BackreachResult r;
  r.config = config_from_json(j.at("config"));
  r.config_hash = j.value("config_hash", "");
  r.dynamics_name = j.at("dynamics").get<std::string>();
  r.state_dim = j.at("state_dim").get<int>();
  r.domain_lo = to_vec(j.at("domain").at("lower"));
  r.domain_hi = to_vec(j.at("domain").at("upper"));
  r.goal_A = to_mat(j.at("goal").at("A"));
  r.goal_b = to_vec(j.at("goal").at("b"));
  for (const auto& sj : j.at("steps")) {
    StepResult s;
    s.t = sj.at("t").get<int>();
    for (const auto& bj : sj.at("balls")) {
      NormBall b{to_vec(bj.at("center")), bj.at("radius").get<double>(),
                 norm_from_name(bj.at("p").get<std::string>())};
      BallProvenance p;
      const auto& pj = bj.at("provenance");
      p.sample_index = pj.at("sample_index").get<std::int64_t>();
      p.incumbent = json_finite(pj.at("incumbent"));
      p.proved_bound = pj.at("proved_bound").get<double>();
      p.domain_fallback = pj.at("domain_fallback").get<bool>();
      p.nodes = pj.at("nodes").get<std::int64_t>();
      p.lp_iterations = pj.at("lp_iterations").get<std::int64_t>();
      s.balls.push_back(std::move(b));
      s.provenance.push_back(std::move(p));
    }
    s.errors = sj.at("errors").get<std::vector<std::string>>();
    r.steps.push_back(std::move(s));
  }
  return r;
}

nlohmann::json timing_to_json(const BackreachResult& r) {
  nlohmann::json per_step = nlohmann::json::array();
  double total = 0.0;
  for (const auto& s : r.steps) {
    nlohmann::json balls = nlohmann::json::array();
    for (const auto& p : s.provenance)
      balls.push_back(p.wall_seconds);
    per_step.push_back({{"t", s.t},
                        {"seconds", s.wall_seconds},
                        {"ball_seconds", std::move(balls)}});
    total += s.wall_seconds;
  }
  return nlohmann::json{{"per_step", std::move(per_step)},
                        {"total_seconds", total}};
}

} // namespace nflreach
