#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nflreach/milp_model.hpp"
#include "nflreach/network.hpp"
#include "nflreach/pwl.hpp"

namespace nflreach {

// One scalar nonlinearity in the update rule: coeff * g(w) where w is a
// single state or control coordinate.
struct NonlinearTerm {
  enum class Source { State, Control };
  Source source = Source::Control;
  int index = 0;
  ScalarFn fn;
  Eigen::VectorXd coeff; // contribution per next-state coordinate
};

// Update rule x' = A x + B u + sum_j coeff_j g_j(w_j) + c with scalar-input
// scalar-output nonlinearities carrying declared Lipschitz bounds.
struct DynamicsTemplate {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
  std::vector<NonlinearTerm> terms;
  std::map<std::string, double> params; // echoed into result files

  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const;
  void validate() const;
};

// Shipped templates. The unicycle advances its position by v along the
// commanded heading each sampling step; affine is the exact oracle system.
DynamicsTemplate make_affine(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::VectorXd& c);
DynamicsTemplate make_unicycle(double v);
DynamicsTemplate make_pendulum(double dt, double g_over_l);

struct NeuralFeedbackLoop {
  DynamicsTemplate dynamics;
  NeuralNetwork controller;
  Eigen::VectorXd domain_lo; // box D the analysis is certified over
  Eigen::VectorXd domain_hi;

  void validate() const;
  Eigen::VectorXd closed_loop_step(const Eigen::VectorXd& x) const;
  bool in_domain(const Eigen::VectorXd& x) const;
};

// Exact closed-loop rollout with the true (non-abstracted) dynamics.
Eigen::VectorXd simulate(const NeuralFeedbackLoop& nfl,
                         const Eigen::VectorXd& x, int t);

struct LayerIntervals {
  std::vector<Interval> pre;
  std::vector<Interval> post;
};

struct StepIntervals {
  std::vector<Interval> state_in;
  std::vector<LayerIntervals> layers;
  std::vector<Interval> control;
  std::vector<Interval> term_in;
  std::vector<Interval> term_out;
  std::vector<Interval> state_out;
};

// Per-step interval bounds through k copies of the closed loop. Everything a
// big-M encoder needs is recorded: states, pre-activations, controls, and
// nonlinearity inputs/outputs.
struct BoundsCache {
  std::vector<StepIntervals> steps;
  int horizon() const { return static_cast<int>(steps.size()); }
};

// Interval arithmetic through k steps: affine interval transforms for
// layers, [max(0,.)] for ReLU, envelope min/max for nonlinear terms. Any
// interval endpoint beyond 1e9 raises BoundsBlowupError.
BoundsCache propagate_bounds(const NeuralFeedbackLoop& nfl,
                             std::span<const PwlEnvelope> envelopes, int k);

struct Abstraction {
  std::vector<PwlEnvelope> envelopes; // aligned with dynamics.terms
  BoundsCache cache;
};

// Builds envelopes whose domains cover every nonlinearity input reachable in
// k abstract steps (fixed point of: choose domains, build envelopes,
// re-propagate) and the matching bounds cache.
Abstraction prepare_abstraction(const NeuralFeedbackLoop& nfl, int k,
                                double rel_tol,
                                const EnvelopeOptions& opts = {});

struct RolloutVars {
  std::vector<std::vector<VarId>> state; // state[s] = vars at step -k+s
  const std::vector<VarId>& initial() const { return state.front(); }
  const std::vector<VarId>& final_state() const { return state.back(); }
};

// Chains k copies of the abstract closed loop into the model: network layers
// through add_relu with cached bounds (stable neurons short-circuit),
// nonlinear terms through encode_envelope, affine parts as equalities.
RolloutVars encode_rollout(MilpModel& m, const NeuralFeedbackLoop& nfl,
                           std::span<const PwlEnvelope> envelopes, int k,
                           const BoundsCache& cache);

} // namespace nflreach
