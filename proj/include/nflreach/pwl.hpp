#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nflreach/milp_model.hpp"

namespace nflreach {

// Scalar function with a caller-certified Lipschitz bound on any interval it
// will be queried over.
struct ScalarFn {
  std::function<double(double)> eval;
  double lipschitz = 1.0;
  std::string label;

  static ScalarFn sine();
  static ScalarFn cosine();
};

// Piecewise-linear function given by strictly increasing knots and values,
// evaluated by linear interpolation.
class PwlFunction {
public:
  PwlFunction(std::vector<double> knots, std::vector<double> values);

  double operator()(double x) const;
  double min_on(double a, double b) const;
  double max_on(double a, double b) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t num_segments() const { return knots_.size() - 1; }

private:
  std::size_t segment_of(double x) const;
  std::vector<double> knots_;
  std::vector<double> values_;
};

// Sound lower/upper piecewise-linear envelope of one scalar nonlinearity:
// lower(x) <= g(x) <= upper(x) on the whole domain. Lower and upper share
// knots so a single indicator set serves both in the MILP encoding.
struct PwlEnvelope {
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  PwlFunction lower;
  PwlFunction upper;
  double certified_rel_error = 0.0;

  // [min lower, max upper] over the (clamped) query interval.
  Interval range_on(Interval in) const;
};

struct EnvelopeOptions {
  std::size_t max_knots = std::size_t{1} << 20;
  int min_samples_per_segment = 9;
  int max_samples_per_segment = 1024;
};

// Uniform knot grid, doubled until the certified relative error
// (upper - lower)_max / max(range g, 1e-12) drops below rel_tol. Each
// segment's offset is the smaller of two sound bounds: the Lipschitz hat
// bound (L^2 - slope^2) h / 2L and the sampled secant deviation inflated by
// (L + |slope|) * h_s / 2 for sampling step h_s.
PwlEnvelope build_envelope(const ScalarFn& g, double a, double b,
                           double rel_tol, const EnvelopeOptions& opts = {});

// Multi-valued encoding of the envelope: one binary per segment overlapping
// the x bounds (none if a single segment is active), with y free between the
// segment's lower and upper lines.
VarId encode_envelope(MilpModel& m, const PwlEnvelope& env, VarId x,
                      Interval xb);

nlohmann::json envelope_to_json(const PwlEnvelope& env);
PwlEnvelope envelope_from_json(const nlohmann::json& j);

} // namespace nflreach
