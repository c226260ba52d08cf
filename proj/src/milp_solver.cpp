#include "nflreach/milp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <queue>
#include <vector>

#include "nflreach/simplex.hpp"

namespace nflreach {

const char* to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::Optimal: return "optimal";
  case SolveStatus::Infeasible: return "infeasible";
  case SolveStatus::Unbounded: return "unbounded";
  case SolveStatus::GapLimit: return "gap_limit";
  case SolveStatus::IterLimit: return "iter_limit";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

enum : std::uint8_t { kFree = 0, kAtZero = 1, kAtOne = 2 };

struct Node {
  std::vector<std::uint8_t> fix;
  double bound = -kInf;
  int depth = 0;
  std::int64_t seq = 0;
};

struct NodeWorse {
  // Min-heap on (bound, deeper first, then insertion order).
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound)
      return a.bound > b.bound;
    if (a.depth != b.depth)
      return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

struct TreeResult {
  SolveStatus status = SolveStatus::Infeasible;
  double incumbent_obj = kInf; // internal minimize sense
  double proved_bound = kInf;
  Eigen::VectorXd incumbent;
  SolveStats stats;
};

// Diving heuristic: from the current LP relaxation, repeatedly fix the most
// fractional binary to its rounded value and re-solve. Returns an integral
// objective and assignment when the dive lands on one. The caller's bound
// state is restored before returning.
std::optional<std::pair<double, Eigen::VectorXd>>
dive_for_incumbent(detail::DualSimplex& spx, const std::vector<int>& bins,
                   const std::vector<std::uint8_t>& fix, double int_tol) {
  struct DiveStep {
    int bin;
    std::uint8_t choice;
    bool flipped;
  };
  std::vector<std::uint8_t> local = fix;
  std::vector<DiveStep> trail;
  std::optional<std::pair<double, Eigen::VectorXd>> found;
  int backtracks = 0;
  std::size_t resolves = 0;
  const std::size_t resolve_cap = 2 * bins.size() + 64;

  const auto apply = [&](int i, std::uint8_t state) {
    local[i] = state;
    switch (state) {
    case kFree: spx.lp().set_bounds(bins[i], 0.0, 1.0); break;
    case kAtZero: spx.lp().set_bounds(bins[i], 0.0, 0.0); break;
    case kAtOne: spx.lp().set_bounds(bins[i], 1.0, 1.0); break;
    }
  };

  while (trail.size() <= bins.size()) {
    int worst = -1;
    double worst_score = int_tol;
    double worst_val = 0.0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (local[i] != kFree)
        continue;
      const double v = spx.values()[bins[i]];
      const double score = std::min(v, 1.0 - v);
      if (score > worst_score) {
        worst_score = score;
        worst = static_cast<int>(i);
        worst_val = v;
      }
    }
    if (worst < 0) {
      found = {spx.objective(), spx.structural_values()};
      break;
    }
    apply(worst, worst_val >= 0.5 ? kAtOne : kAtZero);
    trail.push_back({worst, local[worst], false});

    bool dead = false;
    while (++resolves, spx.reoptimize() != detail::LpStatus::Optimal) {
      // Dead end: flip the most recent unflipped decision.
      bool recovered = false;
      while (!trail.empty()) {
        DiveStep& top = trail.back();
        if (!top.flipped && backtracks < 64) {
          ++backtracks;
          top.flipped = true;
          top.choice = top.choice == kAtOne ? kAtZero : kAtOne;
          apply(top.bin, top.choice);
          recovered = true;
          break;
        }
        apply(top.bin, kFree);
        trail.pop_back();
      }
      if (!recovered) {
        dead = true;
        break;
      }
    }
    if (dead || resolves > resolve_cap)
      break;
  }

  // Restore the caller's bounds.
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (local[i] != fix[i])
      apply(static_cast<int>(i), fix[i]);
  }
  return found;
}

// Branch and bound over the binary columns of an already-loaded simplex.
// Best-first on the node bound with a depth-first plunge after each branch.
// groups lists indicator sets (indices into bins) carrying sum = 1; they are
// branched by dichotomy, halving the candidate set per level.
TreeResult run_tree(detail::DualSimplex& spx, const std::vector<int>& bins,
                    const std::vector<std::vector<int>>& groups,
                    const SolveOptions& opts, bool stop_at_first_incumbent) {
  const auto t0 = Clock::now();
  const std::int64_t iters0 = spx.iterations_total();

  TreeResult res;
  res.incumbent_obj = opts.cutoff; // known feasible value, prunes from node 1
  std::priority_queue<Node, std::vector<Node>, NodeWorse> open;
  std::optional<Node> pending;
  std::vector<std::uint8_t> applied(bins.size(), kFree);
  double pruned_bound_min = kInf; // bounds discarded by the incumbent test
  std::int64_t seq = 0;
  bool limit_hit = false;
  SolveStatus limit_status = SolveStatus::IterLimit;

  // Make sure every binary starts relaxed regardless of earlier sessions.
  for (int col : bins)
    spx.lp().set_bounds(col, 0.0, 1.0);

  pending = Node{std::vector<std::uint8_t>(bins.size(), kFree), -kInf, 0,
                 seq++};

  const auto apply_fix = [&](const std::vector<std::uint8_t>& fix) {
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (applied[i] == fix[i])
        continue;
      switch (fix[i]) {
      case kFree: spx.lp().set_bounds(bins[i], 0.0, 1.0); break;
      case kAtZero: spx.lp().set_bounds(bins[i], 0.0, 0.0); break;
      case kAtOne: spx.lp().set_bounds(bins[i], 1.0, 1.0); break;
      }
      applied[i] = fix[i];
    }
  };

  while (pending || !open.empty()) {
    const bool have_primal =
        res.incumbent.size() > 0 || std::isfinite(opts.cutoff);
    if (opts.node_limit >= 0 && res.stats.nodes >= opts.node_limit) {
      limit_hit = true;
      limit_status =
          have_primal ? SolveStatus::GapLimit : SolveStatus::IterLimit;
      break;
    }
    if (opts.time_limit_s >= 0.0 && seconds_since(t0) > opts.time_limit_s) {
      limit_hit = true;
      limit_status =
          have_primal ? SolveStatus::GapLimit : SolveStatus::IterLimit;
      break;
    }

    Node node;
    if (pending) {
      node = std::move(*pending);
      pending.reset();
    } else {
      node = open.top();
      open.pop();
    }
    if (node.bound >= res.incumbent_obj - opts.gap_tol) {
      pruned_bound_min = std::min(pruned_bound_min, node.bound);
      continue;
    }

    apply_fix(node.fix);
    const detail::LpStatus lps = spx.reoptimize();
    ++res.stats.nodes;
    if (std::getenv("NFLREACH_SPX_LOG") && res.stats.nodes % 5 == 0)
      std::cerr << "[bnb] nodes=" << res.stats.nodes
                << " lp_iters=" << spx.iterations_total() - iters0
                << " inc=" << res.incumbent_obj
                << " depth=" << node.depth
                << " t=" << seconds_since(t0) << "s\n";
    if (lps == detail::LpStatus::IterLimit) {
      limit_hit = true;
      limit_status = SolveStatus::IterLimit;
      // This node is unresolved; its bound stays open.
      pruned_bound_min = std::min(pruned_bound_min, node.bound);
      break;
    }
    if (lps == detail::LpStatus::Infeasible)
      continue;

    const double obj = spx.objective();
    if (obj >= res.incumbent_obj - opts.gap_tol) {
      pruned_bound_min = std::min(pruned_bound_min, obj);
      continue;
    }

    // Most fractional free binary.
    int branch_i = -1;
    double branch_val = 0.0;
    double best_score = opts.int_tol;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (node.fix[i] != kFree)
        continue;
      const double v = spx.values()[bins[i]];
      const double score = std::min(v, 1.0 - v);
      if (score > best_score) {
        best_score = score;
        branch_i = static_cast<int>(i);
        branch_val = v;
      }
    }

    if (branch_i < 0) {
      // Integral point.
      if (obj < res.incumbent_obj) {
        res.incumbent_obj = obj;
        res.incumbent = spx.structural_values();
      }
      if (stop_at_first_incumbent)
        break;
      continue;
    }

    // A cheap dive from fresh relaxations keeps an incumbent available for
    // pruning long before the tree resolves every indicator group. With a
    // caller cutoff the pruning value already exists, so dive only once.
    const bool no_primal =
        res.incumbent.size() == 0 && !std::isfinite(opts.cutoff);
    if (res.stats.nodes == 1 || (no_primal && res.stats.nodes % 200 == 0)) {
      if (auto hit = dive_for_incumbent(spx, bins, node.fix, opts.int_tol)) {
        if (hit->first < res.incumbent_obj) {
          res.incumbent_obj = hit->first;
          res.incumbent = std::move(hit->second);
          if (stop_at_first_incumbent)
            break;
        }
      }
      // The dive moved bounds around; restore this node's relaxation state.
      if (spx.reoptimize() != detail::LpStatus::Optimal)
        continue;
    }

    // Prefer dichotomy on the indicator group with the most fractional
    // members; it halves the candidate set per level instead of peeling one
    // indicator at a time.
    int g_pick = -1;
    std::size_t g_frac = 1;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::size_t frac = 0;
      for (const int i : groups[g]) {
        if (node.fix[i] != kFree)
          continue;
        const double v = spx.values()[bins[i]];
        if (std::min(v, 1.0 - v) > opts.int_tol)
          ++frac;
      }
      if (frac > g_frac) {
        g_frac = frac;
        g_pick = static_cast<int>(g);
      }
    }

    Node follow = node;
    follow.depth = node.depth + 1;
    follow.bound = obj;
    Node other = follow;
    if (g_pick >= 0) {
      std::vector<int> active;
      double best_v = -1.0;
      int best_member = -1;
      for (const int i : groups[g_pick]) {
        if (node.fix[i] != kFree)
          continue;
        active.push_back(i);
        const double v = spx.values()[bins[i]];
        if (v > best_v) {
          best_v = v;
          best_member = i;
        }
      }
      const std::size_t half = (active.size() + 1) / 2;
      bool best_in_left = false;
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (active[a] == best_member && a < half)
          best_in_left = true;
      }
      // follow keeps the half holding the largest LP value.
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (a < half)
          (best_in_left ? other : follow).fix[active[a]] = kAtZero;
        else
          (best_in_left ? follow : other).fix[active[a]] = kAtZero;
      }
    } else {
      follow.fix[branch_i] = branch_val >= 0.5 ? kAtOne : kAtZero;
      other.fix[branch_i] = branch_val >= 0.5 ? kAtZero : kAtOne;
    }
    follow.seq = seq++;
    other.seq = seq++;
    open.push(std::move(other));
    pending = std::move(follow);
  }

  res.stats.lp_iterations = spx.iterations_total() - iters0;
  res.stats.wall_seconds = seconds_since(t0);

  double open_min = kInf;
  if (pending)
    open_min = std::min(open_min, pending->bound);
  while (!open.empty()) {
    open_min = std::min(open_min, open.top().bound);
    open.pop();
  }

  const bool have_inc = res.incumbent.size() > 0;
  if (limit_hit) {
    res.status = limit_status;
    res.proved_bound =
        std::min({res.incumbent_obj, pruned_bound_min, open_min});
  } else if (stop_at_first_incumbent && have_inc) {
    res.status = SolveStatus::Optimal; // feasibility query answered
    res.proved_bound = res.incumbent_obj;
  } else if (have_inc) {
    res.status = SolveStatus::Optimal;
    res.proved_bound = std::min(res.incumbent_obj, pruned_bound_min);
  } else if (std::isfinite(opts.cutoff)) {
    // Tree exhausted against the caller's cutoff: the optimum lies between
    // the proved bound and the cutoff value.
    res.status = SolveStatus::GapLimit;
    res.proved_bound = std::min(opts.cutoff, pruned_bound_min);
  } else {
    res.status = SolveStatus::Infeasible;
    res.proved_bound = kInf;
  }
  return res;
}

std::vector<int> binary_columns(const MilpModel& model) {
  std::vector<int> bins;
  for (std::uint32_t j = 0; j < model.num_vars(); ++j)
    if (model.is_binary(VarId{j}))
      bins.push_back(static_cast<int>(j));
  return bins;
}

std::vector<std::vector<int>> group_bin_indices(const MilpModel& model,
                                                const std::vector<int>& bins) {
  std::vector<int> pos(model.num_vars(), -1);
  for (std::size_t i = 0; i < bins.size(); ++i)
    pos[bins[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> out;
  for (const auto& g : model.sos1_groups()) {
    std::vector<int> idx;
    for (const VarId v : g)
      if (pos[v.index] >= 0)
        idx.push_back(pos[v.index]);
    if (idx.size() > 1)
      out.push_back(std::move(idx));
  }
  return out;
}

void validate_model(const MilpModel& model) {
  for (std::uint32_t j = 0; j < model.num_vars(); ++j) {
    const Interval b = model.bounds(VarId{j});
    if (!b.is_finite())
      throw SolveError("variable " + model.var_name(VarId{j}) +
                       " has non-finite bounds; solver requires finite "
                       "bounds on every variable");
  }
}

detail::SimplexOptions simplex_options(const SolveOptions& opts) {
  detail::SimplexOptions so;
  so.feas_tol = opts.feas_tol;
  so.iter_limit = opts.lp_iter_limit;
  return so;
}

Solution finish_solution(const MilpModel& model, const TreeResult& tree) {
  const double sign =
      model.objective_sense() == ObjSense::Maximize ? -1.0 : 1.0;
  Solution s;
  s.status = tree.status;
  s.stats = tree.stats;
  if (tree.incumbent.size() > 0) {
    s.assignment = tree.incumbent;
    s.objective = sign * tree.incumbent_obj + model.objective_constant();
  } else if (std::isfinite(tree.incumbent_obj)) {
    // No assignment was recovered but the caller's cutoff is feasible.
    s.objective = sign * tree.incumbent_obj + model.objective_constant();
  }
  if (std::isfinite(tree.proved_bound))
    s.bound = sign * tree.proved_bound + model.objective_constant();
  return s;
}

} // namespace

Solution BranchAndBoundSolver::solve(const MilpModel& model,
                                     const SolveOptions& opts) {
  validate_model(model);
  detail::DualSimplex spx(detail::BoundedLp(model), simplex_options(opts));
  const std::vector<int> bins = binary_columns(model);
  const TreeResult tree =
      run_tree(spx, bins, group_bin_indices(model, bins), opts, false);
  return finish_solution(model, tree);
}

Solution solve(const MilpModel& model, const SolveOptions& opts) {
  BranchAndBoundSolver backend;
  return backend.solve(model, opts);
}

FeasibilityResult check_feasible(const MilpModel& model,
                                 const SolveOptions& opts) {
  validate_model(model);
  detail::BoundedLp lp(model);
  lp.set_objective(Eigen::VectorXd::Zero(static_cast<int>(model.num_vars())));
  detail::DualSimplex spx(std::move(lp), simplex_options(opts));
  const std::vector<int> bins = binary_columns(model);
  const TreeResult tree =
      run_tree(spx, bins, group_bin_indices(model, bins), opts, true);

  FeasibilityResult r;
  r.stats = tree.stats;
  if (tree.incumbent.size() > 0) {
    r.kind = FeasibilityResult::Kind::Feasible;
    r.witness = tree.incumbent;
  } else if (tree.status == SolveStatus::Infeasible) {
    r.kind = FeasibilityResult::Kind::Infeasible;
  } else {
    r.kind = FeasibilityResult::Kind::Unknown;
  }
  return r;
}

// --- incremental session ----------------------------------------------------

struct BnbSession::Impl {
  Impl(const MilpModel& model, const SolveOptions& opts)
      : spx(detail::BoundedLp(model), simplex_options(opts)), opts(opts),
        bins(binary_columns(model)), groups(group_bin_indices(model, bins)),
        sign(model.objective_sense() == ObjSense::Maximize ? -1.0 : 1.0),
        obj_constant(model.objective_constant()) {
    validate_model(model);
  }

  detail::DualSimplex spx;
  SolveOptions opts;
  std::vector<int> bins;
  std::vector<std::vector<int>> groups;
  double sign;
  double obj_constant;
};

BnbSession::BnbSession(const MilpModel& model, const SolveOptions& opts)
    : impl_(std::make_unique<Impl>(model, opts)) {}

BnbSession::~BnbSession() = default;
BnbSession::BnbSession(BnbSession&&) noexcept = default;
BnbSession& BnbSession::operator=(BnbSession&&) noexcept = default;

void BnbSession::set_row_rhs(std::size_t row, double rhs) {
  impl_->spx.lp().set_row_rhs(static_cast<int>(row), rhs);
}

void BnbSession::set_var_bounds(VarId v, double lo, double hi) {
  impl_->spx.lp().set_bounds(static_cast<int>(v.index), lo, hi);
}

void BnbSession::set_cutoff(double cutoff) { impl_->opts.cutoff = cutoff; }

Solution BnbSession::solve() {
  const TreeResult tree =
      run_tree(impl_->spx, impl_->bins, impl_->groups, impl_->opts, false);
  Solution s;
  s.status = tree.status;
  s.stats = tree.stats;
  if (tree.incumbent.size() > 0) {
    s.assignment = tree.incumbent;
    s.objective = impl_->sign * tree.incumbent_obj + impl_->obj_constant;
  } else if (std::isfinite(tree.incumbent_obj)) {
    s.objective = impl_->sign * tree.incumbent_obj + impl_->obj_constant;
  }
  if (std::isfinite(tree.proved_bound))
    s.bound = impl_->sign * tree.proved_bound + impl_->obj_constant;
  return s;
}

} // namespace nflreach
