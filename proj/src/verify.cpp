#include "nflreach/verify.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace nflreach {

namespace {

// Smallest p-distance from the box to a point (0 when inside).
double box_distance(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                    const NormBall& ball) {
  double linf = 0.0, l1 = 0.0;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const double d = std::max({lo(i) - ball.center(i),
                               ball.center(i) - hi(i), 0.0});
    linf = std::max(linf, d);
    l1 += d;
  }
  return ball.p == Norm::Linf ? linf : l1;
}

// Axis-aligned bounding box of {x | Cx <= d} via 2n LP solves.
void bounding_box(const Polytope& poly, Eigen::VectorXd& lo,
                  Eigen::VectorXd& hi) {
  const Eigen::Index n = poly.dim();
  lo.resize(n);
  hi.resize(n);
  for (Eigen::Index coord = 0; coord < n; ++coord) {
    for (int dir = 0; dir < 2; ++dir) {
      MilpModel m;
      std::vector<VarId> xs;
      for (Eigen::Index i = 0; i < n; ++i)
        xs.push_back(m.add_continuous(-1e7, 1e7));
      for (Eigen::Index r = 0; r < poly.num_rows(); ++r) {
        LinExpr e;
        for (Eigen::Index j = 0; j < n; ++j)
          if (poly.A()(r, j) != 0.0)
            e.add(poly.A()(r, j), xs[j]);
        m.add_constraint(e, Sense::Le, poly.b()(r));
      }
      m.set_objective(LinExpr::of(xs[coord]),
                      dir == 0 ? ObjSense::Minimize : ObjSense::Maximize);
      const Solution s = solve(m);
      if (s.status != SolveStatus::Optimal)
        throw ConfigError("start set is empty or unbounded");
      (dir == 0 ? lo : hi)(coord) = s.objective;
    }
  }
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

CheckVerdict check_goal_reaching(const StartSet& start,
                                 const BackreachResult& result,
                                 const SolveOptions& opts) {
  std::vector<NormBall> balls;
  for (const auto& s : result.steps)
    for (const auto& b : s.balls)
      balls.push_back(b);
  if (balls.empty())
    throw ConfigError("check_goal_reaching: result contains no balls");
  for (const auto& b : balls)
    if (b.center.size() != start.poly.dim())
      throw ConfigError("check_goal_reaching: dimension mismatch");

  Eigen::VectorXd lo, hi;
  bounding_box(start.poly, lo, hi);
  const double pad = 1e-9;

  MilpModel m;
  std::vector<VarId> xs;
  std::vector<Interval> xb;
  for (Eigen::Index i = 0; i < start.poly.dim(); ++i) {
    xs.push_back(m.add_continuous(lo(i) - pad, hi(i) + pad));
    xb.push_back({lo(i) - pad, hi(i) + pad});
  }
  for (Eigen::Index r = 0; r < start.poly.num_rows(); ++r) {
    LinExpr e;
    for (Eigen::Index j = 0; j < start.poly.dim(); ++j)
      if (start.poly.A()(r, j) != 0.0)
        e.add(start.poly.A()(r, j), xs[j]);
    m.add_constraint(e, Sense::Le, start.poly.b()(r));
  }

  for (const auto& ball : balls) {
    // A ball that cannot reach the bounding box excludes nothing here.
    if (box_distance(lo, hi, ball) >= ball.radius)
      continue;
    add_not_in_ball(m, xs, ball, xb);
  }

  const FeasibilityResult fr = check_feasible(m, opts);
  CheckVerdict v;
  v.stats = fr.stats;
  if (fr.kind == FeasibilityResult::Kind::Infeasible) {
    v.subset = true;
    return v;
  }
  if (fr.kind == FeasibilityResult::Kind::Unknown)
    throw SolveError("check_goal_reaching: solver limit reached before an "
                     "answer was proven");

  Eigen::VectorXd w(start.poly.dim());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = fr.witness(xs[i].index);
  // Never trust the solver here: the witness must sit in the start set and
  // outside (or on the boundary of) every stored ball.
  if (start.poly.max_residual(w) > 1e-7)
    throw SolveError("check_goal_reaching: witness fails start-set "
                     "re-evaluation (internal inconsistency)");
  for (const auto& ball : balls)
    if (ball.distance(w) < ball.radius - 1e-9)
      throw SolveError("check_goal_reaching: witness lies strictly inside a "
                       "stored ball (internal inconsistency)");
  v.subset = false;
  v.witness = std::move(w);
  return v;
}

CoverageReport estimate_coverage(const NeuralFeedbackLoop& nfl,
                                 const GoalSet& goal,
                                 const BackreachResult& result,
                                 std::int64_t samples, std::uint64_t seed) {
  if (samples < 1)
    throw ConfigError("estimate_coverage: sample count must be >= 1");
  nfl.validate();

  CoverageReport rep;
  rep.samples = samples;
  rep.seed = seed;

  std::mt19937_64 rng(seed);
  const Eigen::Index n = nfl.domain_lo.size();

  std::vector<std::pair<Eigen::VectorXd, int>> pooled; // accepted (x, t)
  for (const auto& step : result.steps) {
    CoverageCell cell;
    cell.t = step.t;
    for (std::int64_t s = 0; s < samples; ++s) {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i)
        x(i) = nfl.domain_lo(i) +
               uniform01(rng) * (nfl.domain_hi(i) - nfl.domain_lo(i));
      if (!goal.poly.contains(simulate(nfl, x, step.t), 1e-12))
        continue;
      ++cell.accepted;
      pooled.emplace_back(x, step.t);
      for (const auto& b : step.balls) {
        if (b.contains(x, 1e-12)) {
          ++cell.covered;
          break;
        }
      }
    }
    cell.defined = cell.accepted > 0;
    cell.fraction = cell.defined ? static_cast<double>(cell.covered) /
                                       static_cast<double>(cell.accepted)
                                 : 0.0;
    rep.per_step.push_back(cell);
  }

  CoverageCell u;
  u.t = 0;
  for (const auto& [x, t] : pooled) {
    ++u.accepted;
    bool inside = false;
    for (const auto& step : result.steps) {
      for (const auto& b : step.balls)
        if (b.contains(x, 1e-12)) {
          inside = true;
          break;
        }
      if (inside)
        break;
    }
    if (inside)
      ++u.covered;
  }
  u.defined = u.accepted > 0;
  u.fraction = u.defined ? static_cast<double>(u.covered) /
                               static_cast<double>(u.accepted)
                         : 0.0;
  rep.union_cell = u;
  return rep;
}

nlohmann::json verdict_to_json(const CheckVerdict& v) {
  nlohmann::json j{{"subset", v.subset},
                   {"nodes", v.stats.nodes},
                   {"lp_iterations", v.stats.lp_iterations}};
  if (!v.subset) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.witness.size(); ++i)
      w.push_back(v.witness(i));
    j["witness"] = std::move(w);
  }
  return j;
}

namespace {

nlohmann::json cell_to_json(const CoverageCell& c) {
  nlohmann::json j{{"accepted", c.accepted}, {"covered", c.covered}};
  if (c.defined)
    j["fraction"] = c.fraction;
  else
    j["fraction"] = nullptr;
  return j;
}

} // namespace

nlohmann::json coverage_to_json(const CoverageReport& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& c : r.per_step) {
    nlohmann::json j = cell_to_json(c);
    j["t"] = c.t;
    steps.push_back(std::move(j));
  }
  return nlohmann::json{{"samples", r.samples},
                        {"seed", r.seed},
                        {"per_step", std::move(steps)},
                        {"union", cell_to_json(r.union_cell)}};
}

void coverage_to_csv(const CoverageReport& r, int n_samp, std::ostream& os,
                     bool header) {
  if (header) {
    os << "n_samp";
    for (const auto& c : r.per_step)
      os << ",t" << c.t;
    os << ",union\n";
  }
  os << n_samp;
  const auto emit = [&os](const CoverageCell& c) {
    if (c.defined) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", c.fraction);
      os << "," << buf;
    } else {
      os << ",NA";
    }
  };
  for (const auto& c : r.per_step)
    emit(c);
  emit(r.union_cell);
  os << "\n";
}

} // namespace nflreach
