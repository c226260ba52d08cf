#include "nflreach/nfl.hpp"

#include <algorithm>
#include <cmath>

namespace nflreach {

namespace {

constexpr double kClip = 1e9;

void check_clip(const std::vector<Interval>& iv, int step) {
  for (const auto& b : iv)
    if (!b.is_finite() || std::abs(b.lo) > kClip || std::abs(b.hi) > kClip)
      throw BoundsBlowupError(
          "interval bounds exceeded 1e9 at step " + std::to_string(step) +
          "; use a smaller domain D or fewer steps");
}

// Interval image of w . x + b over a box.
Interval affine_row_range(const Eigen::RowVectorXd& w, double b,
                          const std::vector<Interval>& x) {
  double lo = b, hi = b;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double c = w(j);
    if (c == 0.0)
      continue;
    lo += std::min(c * x[j].lo, c * x[j].hi);
    hi += std::max(c * x[j].lo, c * x[j].hi);
  }
  return {lo, hi};
}

// Sound range of g over an interval: dense sampling inflated by L * h / 2.
Interval sound_range(const ScalarFn& g, Interval in, int samples = 513) {
  if (in.lo == in.hi) {
    const double v = g.eval(in.lo);
    return {v, v};
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const double h = in.width() / static_cast<double>(samples - 1);
  for (int i = 0; i < samples; ++i) {
    const double x = i + 1 == samples ? in.hi : in.lo + h * i;
    const double v = g.eval(x);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double pad = g.lipschitz * h / 2.0;
  return {lo - pad, hi + pad};
}

} // namespace

Eigen::VectorXd DynamicsTemplate::step(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& u) const {
  Eigen::VectorXd next = A * x + B * u + c;
  for (const auto& term : terms) {
    const double w = term.source == NonlinearTerm::Source::State
                         ? x(term.index)
                         : u(term.index);
    next += term.coeff * term.fn.eval(w);
  }
  return next;
}

void DynamicsTemplate::validate() const {
  if (state_dim <= 0 || control_dim <= 0)
    throw ConfigError("dynamics '" + name + "': bad dimensions");
  if (A.rows() != state_dim || A.cols() != state_dim)
    throw ConfigError("dynamics '" + name + "': A must be state x state");
  if (B.rows() != state_dim || B.cols() != control_dim)
    throw ConfigError("dynamics '" + name + "': B must be state x control");
  if (c.size() != state_dim)
    throw ConfigError("dynamics '" + name + "': c must be state-sized");
  for (const auto& t : terms) {
    if (t.coeff.size() != state_dim)
      throw ConfigError("dynamics '" + name +
                        "': term coefficient must be state-sized");
    const int limit = t.source == NonlinearTerm::Source::State ? state_dim
                                                               : control_dim;
    if (t.index < 0 || t.index >= limit)
      throw ConfigError("dynamics '" + name + "': term input out of range");
    if (!std::isfinite(t.fn.lipschitz) || t.fn.lipschitz < 0.0)
      throw ConfigError("dynamics '" + name + "': term needs a Lipschitz bound");
  }
}

DynamicsTemplate make_affine(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::VectorXd& c) {
  DynamicsTemplate d;
  d.name = "affine";
  d.state_dim = static_cast<int>(A.rows());
  d.control_dim = static_cast<int>(B.cols());
  d.A = A;
  d.B = B;
  d.c = c;
  d.validate();
  return d;
}

DynamicsTemplate make_unicycle(double v) {
  DynamicsTemplate d;
  d.name = "unicycle_heading";
  d.state_dim = 2;
  d.control_dim = 1;
  d.A = Eigen::MatrixXd::Identity(2, 2);
  d.B = Eigen::MatrixXd::Zero(2, 1);
  d.c = Eigen::VectorXd::Zero(2);
  d.params["v"] = v;

  NonlinearTerm cos_term;
  cos_term.source = NonlinearTerm::Source::Control;
  cos_term.index = 0;
  cos_term.fn = ScalarFn::cosine();
  cos_term.coeff = Eigen::Vector2d(v, 0.0);
  NonlinearTerm sin_term;
  sin_term.source = NonlinearTerm::Source::Control;
  sin_term.index = 0;
  sin_term.fn = ScalarFn::sine();
  sin_term.coeff = Eigen::Vector2d(0.0, v);
  d.terms = {cos_term, sin_term};
  d.validate();
  return d;
}

DynamicsTemplate make_pendulum(double dt, double g_over_l) {
  DynamicsTemplate d;
  d.name = "pendulum";
  d.state_dim = 2; // angle, angular velocity
  d.control_dim = 1;
  d.A = Eigen::MatrixXd::Identity(2, 2);
  d.A(0, 1) = dt;
  d.B = Eigen::MatrixXd::Zero(2, 1);
  d.B(1, 0) = dt;
  d.c = Eigen::VectorXd::Zero(2);
  d.params["dt"] = dt;
  d.params["g_over_l"] = g_over_l;

  NonlinearTerm sin_term;
  sin_term.source = NonlinearTerm::Source::State;
  sin_term.index = 0;
  sin_term.fn = ScalarFn::sine();
  sin_term.coeff = Eigen::Vector2d(0.0, -dt * g_over_l);
  d.terms = {sin_term};
  d.validate();
  return d;
}

void NeuralFeedbackLoop::validate() const {
  dynamics.validate();
  if (controller.input_dim() != dynamics.state_dim)
    throw ConfigError("controller input dim " +
                      std::to_string(controller.input_dim()) +
                      " != state dim " + std::to_string(dynamics.state_dim));
  if (controller.output_dim() != dynamics.control_dim)
    throw ConfigError("controller output dim " +
                      std::to_string(controller.output_dim()) +
                      " != control dim " + std::to_string(dynamics.control_dim));
  if (domain_lo.size() != dynamics.state_dim ||
      domain_hi.size() != dynamics.state_dim)
    throw ConfigError("domain box must be state-dimensional");
  for (Eigen::Index i = 0; i < domain_lo.size(); ++i)
    if (!(domain_lo(i) < domain_hi(i)))
      throw ConfigError("domain box is empty in coordinate " +
                        std::to_string(i));
}

Eigen::VectorXd
NeuralFeedbackLoop::closed_loop_step(const Eigen::VectorXd& x) const {
  return dynamics.step(x, controller.evaluate(x));
}

bool NeuralFeedbackLoop::in_domain(const Eigen::VectorXd& x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < domain_lo(i) || x(i) > domain_hi(i))
      return false;
  return true;
}

Eigen::VectorXd simulate(const NeuralFeedbackLoop& nfl,
                         const Eigen::VectorXd& x, int t) {
  if (t < 0)
    throw ConfigError("simulate: negative step count");
  Eigen::VectorXd z = x;
  for (int i = 0; i < t; ++i)
    z = nfl.closed_loop_step(z);
  return z;
}

BoundsCache propagate_bounds(const NeuralFeedbackLoop& nfl,
                             std::span<const PwlEnvelope> envelopes, int k) {
  if (k < 1)
    throw ConfigError("propagate_bounds: k must be >= 1");
  const auto& dyn = nfl.dynamics;
  if (envelopes.size() != dyn.terms.size())
    throw ConfigError("propagate_bounds: envelope count != term count");

  BoundsCache cache;
  std::vector<Interval> state(dyn.state_dim);
  for (int i = 0; i < dyn.state_dim; ++i)
    state[i] = {nfl.domain_lo(i), nfl.domain_hi(i)};

  for (int s = 0; s < k; ++s) {
    StepIntervals step;
    step.state_in = state;

    // Network layers.
    std::vector<Interval> z = state;
    for (const auto& layer : nfl.controller.layers()) {
      LayerIntervals li;
      li.pre.resize(layer.W.rows());
      li.post.resize(layer.W.rows());
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
        li.pre[i] = affine_row_range(layer.W.row(i), layer.b(i), z);
        li.post[i] = layer.act == Activation::Relu
                         ? Interval{std::max(0.0, li.pre[i].lo),
                                    std::max(0.0, li.pre[i].hi)}
                         : li.pre[i];
      }
      check_clip(li.pre, s);
      z = li.post;
      step.layers.push_back(std::move(li));
    }
    step.control = z;
    check_clip(step.control, s);

    // Nonlinear terms through their envelopes.
    for (std::size_t j = 0; j < dyn.terms.size(); ++j) {
      const auto& term = dyn.terms[j];
      const Interval in = term.source == NonlinearTerm::Source::State
                              ? step.state_in[term.index]
                              : step.control[term.index];
      step.term_in.push_back(in);
      step.term_out.push_back(envelopes[j].range_on(in));
    }

    // Next state.
    std::vector<Interval> next(dyn.state_dim);
    for (int i = 0; i < dyn.state_dim; ++i) {
      Interval v = affine_row_range(dyn.A.row(i), dyn.c(i), step.state_in);
      const Interval bu = affine_row_range(dyn.B.row(i), 0.0, step.control);
      v = {v.lo + bu.lo, v.hi + bu.hi};
      for (std::size_t j = 0; j < dyn.terms.size(); ++j) {
        const double cj = dyn.terms[j].coeff(i);
        if (cj == 0.0)
          continue;
        const Interval& to = step.term_out[j];
        v = {v.lo + std::min(cj * to.lo, cj * to.hi),
             v.hi + std::max(cj * to.lo, cj * to.hi)};
      }
      next[i] = v;
    }
    check_clip(next, s);
    step.state_out = next;
    state = next;
    cache.steps.push_back(std::move(step));
  }
  return cache;
}

Abstraction prepare_abstraction(const NeuralFeedbackLoop& nfl, int k,
                                double rel_tol, const EnvelopeOptions& opts) {
  nfl.validate();
  const auto& terms = nfl.dynamics.terms;

  // First pass with the true function ranges to get provisional domains.
  std::vector<Interval> domains(terms.size(),
                                {std::numeric_limits<double>::infinity(),
                                 -std::numeric_limits<double>::infinity()});
  {
    std::vector<Interval> state(nfl.dynamics.state_dim);
    for (int i = 0; i < nfl.dynamics.state_dim; ++i)
      state[i] = {nfl.domain_lo(i), nfl.domain_hi(i)};
    for (int s = 0; s < k; ++s) {
      std::vector<Interval> z = state;
      for (const auto& layer : nfl.controller.layers()) {
        std::vector<Interval> nz(layer.W.rows());
        for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
          nz[i] = affine_row_range(layer.W.row(i), layer.b(i), z);
          if (layer.act == Activation::Relu)
            nz[i] = {std::max(0.0, nz[i].lo), std::max(0.0, nz[i].hi)};
        }
        z = std::move(nz);
      }
      std::vector<Interval> touts;
      for (const auto& term : terms) {
        const Interval in = term.source == NonlinearTerm::Source::State
                                ? state[term.index]
                                : z[term.index];
        domains[&term - terms.data()] =
            domains[&term - terms.data()].hull(in);
        touts.push_back(sound_range(term.fn, in));
      }
      std::vector<Interval> next(nfl.dynamics.state_dim);
      for (int i = 0; i < nfl.dynamics.state_dim; ++i) {
        Interval v = affine_row_range(nfl.dynamics.A.row(i), nfl.dynamics.c(i),
                                      state);
        const Interval bu = affine_row_range(nfl.dynamics.B.row(i), 0.0, z);
        v = {v.lo + bu.lo, v.hi + bu.hi};
        for (std::size_t j = 0; j < terms.size(); ++j) {
          const double cj = terms[j].coeff(i);
          if (cj == 0.0)
            continue;
          v = {v.lo + std::min(cj * touts[j].lo, cj * touts[j].hi),
               v.hi + std::max(cj * touts[j].lo, cj * touts[j].hi)};
        }
        next[i] = v;
      }
      check_clip(next, s);
      state = std::move(next);
    }
  }

  // Envelopes widen states slightly, which can widen the term inputs; iterate
  // to a fixed point.
  Abstraction abs;
  for (int round = 0; round < 8; ++round) {
    abs.envelopes.clear();
    for (std::size_t j = 0; j < terms.size(); ++j) {
      Interval d = domains[j];
      const double pad = 1e-9 + 1e-6 * std::max(1.0, d.width());
      d = {d.lo - pad, d.hi + pad};
      abs.envelopes.push_back(
          build_envelope(terms[j].fn, d.lo, d.hi, rel_tol, opts));
    }
    abs.cache = propagate_bounds(nfl, abs.envelopes, k);

    bool covered = true;
    for (const auto& step : abs.cache.steps) {
      for (std::size_t j = 0; j < terms.size(); ++j) {
        const Interval in = step.term_in[j];
        if (in.lo < abs.envelopes[j].domain_lo ||
            in.hi > abs.envelopes[j].domain_hi) {
          domains[j] = domains[j].hull(in);
          covered = false;
        }
      }
    }
    if (covered)
      return abs;
  }
  throw BoundsBlowupError(
      "prepare_abstraction: envelope domains did not stabilize in 8 rounds");
}

RolloutVars encode_rollout(MilpModel& m, const NeuralFeedbackLoop& nfl,
                           std::span<const PwlEnvelope> envelopes, int k,
                           const BoundsCache& cache) {
  if (k < 1)
    throw EncodingError("encode_rollout: k must be >= 1");
  if (cache.horizon() < k)
    throw EncodingError("encode_rollout: bounds cache does not cover k steps");
  const auto& dyn = nfl.dynamics;

  RolloutVars out;
  std::vector<VarId> state(dyn.state_dim);
  for (int i = 0; i < dyn.state_dim; ++i)
    state[i] = m.add_continuous(nfl.domain_lo(i), nfl.domain_hi(i));
  out.state.push_back(state);

  for (int s = 0; s < k; ++s) {
    const StepIntervals& si = cache.steps[s];

    // Controller.
    std::vector<VarId> z = state;
    for (std::size_t li = 0; li < nfl.controller.layers().size(); ++li) {
      const Layer& layer = nfl.controller.layers()[li];
      const LayerIntervals& lb = si.layers[li];
      std::vector<VarId> next(layer.W.rows());
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
        VarId pre = m.add_continuous(lb.pre[i].lo, lb.pre[i].hi);
        LinExpr def = LinExpr::of(pre, -1.0);
        for (Eigen::Index jj = 0; jj < layer.W.cols(); ++jj)
          if (layer.W(i, jj) != 0.0)
            def.add(layer.W(i, jj), z[jj]);
        m.add_constraint(def, Sense::Eq, -layer.b(i));
        next[i] = layer.act == Activation::Relu
                      ? add_relu(m, pre, lb.pre[i])
                      : pre;
      }
      z = std::move(next);
    }

    // Nonlinear terms.
    std::vector<VarId> term_vars(dyn.terms.size());
    for (std::size_t j = 0; j < dyn.terms.size(); ++j) {
      const auto& term = dyn.terms[j];
      const VarId in_var = term.source == NonlinearTerm::Source::State
                               ? state[term.index]
                               : z[term.index];
      term_vars[j] = encode_envelope(m, envelopes[j], in_var, si.term_in[j]);
    }

    // Next state as pure equalities.
    std::vector<VarId> next(dyn.state_dim);
    for (int i = 0; i < dyn.state_dim; ++i) {
      VarId xv = m.add_continuous(si.state_out[i].lo, si.state_out[i].hi);
      LinExpr def = LinExpr::of(xv, -1.0);
      for (int jj = 0; jj < dyn.state_dim; ++jj)
        if (dyn.A(i, jj) != 0.0)
          def.add(dyn.A(i, jj), state[jj]);
      for (int jj = 0; jj < dyn.control_dim; ++jj)
        if (dyn.B(i, jj) != 0.0)
          def.add(dyn.B(i, jj), z[jj]);
      for (std::size_t jj = 0; jj < dyn.terms.size(); ++jj)
        if (dyn.terms[jj].coeff(i) != 0.0)
          def.add(dyn.terms[jj].coeff(i), term_vars[jj]);
      m.add_constraint(def, Sense::Eq, -dyn.c(i));
      next[i] = xv;
    }
    state = next;
    out.state.push_back(state);
  }
  return out;
}

} // namespace nflreach
