#include "nflreach/pwl.hpp"

#include <algorithm>
#include <cmath>

namespace nflreach {

ScalarFn ScalarFn::sine() {
  return {[](double x) { return std::sin(x); }, 1.0, "sin"};
}

ScalarFn ScalarFn::cosine() {
  return {[](double x) { return std::cos(x); }, 1.0, "cos"};
}

PwlFunction::PwlFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() < 2 || knots_.size() != values_.size())
    throw EncodingError("PwlFunction: need >= 2 knots with matching values");
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
    if (!(knots_[i] < knots_[i + 1]))
      throw EncodingError("PwlFunction: knots must be strictly increasing");
  for (double v : values_)
    if (!std::isfinite(v))
      throw EncodingError("PwlFunction: non-finite value");
}

std::size_t PwlFunction::segment_of(double x) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
  if (idx == 0)
    return 0;
  if (idx >= knots_.size())
    return knots_.size() - 2;
  return idx - 1;
}

double PwlFunction::operator()(double x) const {
  const double slack = 1e-9 * (1.0 + std::abs(knots_.back() - knots_.front()));
  if (x < knots_.front() - slack || x > knots_.back() + slack)
    throw DomainError("PwlFunction: evaluation outside domain");
  const std::size_t s = segment_of(x);
  const double h = knots_[s + 1] - knots_[s];
  const double w = std::clamp((x - knots_[s]) / h, 0.0, 1.0);
  return values_[s] + w * (values_[s + 1] - values_[s]);
}

double PwlFunction::min_on(double a, double b) const {
  double best = std::min((*this)(a), (*this)(b));
  for (std::size_t i = 0; i < knots_.size(); ++i)
    if (knots_[i] > a && knots_[i] < b)
      best = std::min(best, values_[i]);
  return best;
}

double PwlFunction::max_on(double a, double b) const {
  double best = std::max((*this)(a), (*this)(b));
  for (std::size_t i = 0; i < knots_.size(); ++i)
    if (knots_[i] > a && knots_[i] < b)
      best = std::max(best, values_[i]);
  return best;
}

Interval PwlEnvelope::range_on(Interval in) const {
  const double slack = 1e-9 * (1.0 + std::abs(domain_hi - domain_lo));
  if (in.lo < domain_lo - slack || in.hi > domain_hi + slack)
    throw DomainError("PwlEnvelope: query interval escapes the domain");
  const double a = std::clamp(in.lo, domain_lo, domain_hi);
  const double b = std::clamp(in.hi, domain_lo, domain_hi);
  return {lower.min_on(a, b), upper.max_on(a, b)};
}

PwlEnvelope build_envelope(const ScalarFn& g, double a, double b,
                           double rel_tol, const EnvelopeOptions& opts) {
  if (!(a < b))
    throw EncodingError("build_envelope: need a < b");
  if (!(rel_tol > 0.0))
    throw EncodingError("build_envelope: rel_tol must be positive");
  if (g.lipschitz < 0.0 || !std::isfinite(g.lipschitz))
    throw EncodingError("build_envelope: bad Lipschitz bound");
  const double L = g.lipschitz;

  std::size_t segments = 1;
  for (;;) {
    const std::size_t nk = segments + 1;
    if (nk > opts.max_knots)
      throw EncodingError(
          "build_envelope: knot cap exceeded before reaching tolerance for " +
          (g.label.empty() ? std::string("<fn>") : g.label) +
          "; use a looser rel_tol");

    const double h = (b - a) / static_cast<double>(segments);
    std::vector<double> knots(nk), gk(nk);
    for (std::size_t i = 0; i < nk; ++i) {
      knots[i] = i + 1 == nk ? b : a + h * static_cast<double>(i);
      gk[i] = g.eval(knots[i]);
      if (!std::isfinite(gk[i]))
        throw EncodingError("build_envelope: function not finite at " +
                            std::to_string(knots[i]));
    }

    double gmin = *std::min_element(gk.begin(), gk.end());
    double gmax = *std::max_element(gk.begin(), gk.end());
    // rel_tol is relative to the function's range over the domain; seed the
    // absolute budget from the knot values (the sampling pass refines it).
    const double tol_abs0 = rel_tol * std::max(gmax - gmin, 1e-12);

    std::vector<double> offset(segments, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
      const double slope = (gk[s + 1] - gk[s]) / h;
      // Hat bound, valid only while the secant slope respects L.
      double hat = std::numeric_limits<double>::infinity();
      if (L == 0.0)
        hat = 0.0;
      else if (std::abs(slope) <= L)
        hat = (L * L - slope * slope) * h / (2.0 * L);

      // Sampling step chosen so the inflation uses at most a quarter of the
      // absolute budget, within the per-segment cap.
      const double dev_lip = L + std::abs(slope);
      int samples = opts.min_samples_per_segment;
      if (dev_lip > 0.0 && tol_abs0 > 0.0) {
        const double want = 2.0 * dev_lip * h / tol_abs0; // h/h_s
        if (want > samples)
          samples = static_cast<int>(std::min(
              static_cast<double>(opts.max_samples_per_segment), want + 1.0));
      }
      double dev = 0.0;
      for (int i = 1; i < samples; ++i) {
        const double x =
            knots[s] + h * static_cast<double>(i) / static_cast<double>(samples);
        const double sec =
            gk[s] + slope * (x - knots[s]);
        const double gx = g.eval(x);
        dev = std::max(dev, std::abs(gx - sec));
        gmin = std::min(gmin, gx);
        gmax = std::max(gmax, gx);
      }
      const double h_s = h / static_cast<double>(samples);
      const double infl = dev_lip * h_s / 2.0;
      offset[s] = std::min(hat, dev + infl);
    }

    const double max_offset = *std::max_element(offset.begin(), offset.end());
    const double range = std::max(gmax - gmin, 1e-12);
    const double rel = 2.0 * max_offset / range;
    if (rel <= rel_tol) {
      // Knot offsets take the larger neighbour so both adjacent segments
      // stay sound under interpolation.
      std::vector<double> lov(nk), upv(nk);
      for (std::size_t i = 0; i < nk; ++i) {
        double o = 0.0;
        if (i > 0)
          o = std::max(o, offset[i - 1]);
        if (i < segments)
          o = std::max(o, offset[i]);
        lov[i] = gk[i] - o;
        upv[i] = gk[i] + o;
      }
      PwlEnvelope env{a, b, PwlFunction(knots, lov), PwlFunction(knots, upv),
                      rel};
      return env;
    }
    segments *= 2;
  }
}

VarId encode_envelope(MilpModel& m, const PwlEnvelope& env, VarId x,
                      Interval xb) {
  const double slack = 1e-9 * (1.0 + std::abs(env.domain_hi - env.domain_lo));
  if (xb.lo < env.domain_lo - slack || xb.hi > env.domain_hi + slack)
    throw DomainError("encode_envelope: x bounds escape the envelope domain");
  const double lo = std::clamp(xb.lo, env.domain_lo, env.domain_hi);
  const double hi = std::clamp(xb.hi, env.domain_lo, env.domain_hi);

  const auto& knots = env.lower.knots();
  const auto& lov = env.lower.values();
  const auto& upv = env.upper.values();

  std::vector<std::size_t> active;
  for (std::size_t s = 0; s + 1 < knots.size(); ++s)
    if (knots[s + 1] >= lo && knots[s] <= hi)
      active.push_back(s);
  if (active.empty())
    throw DomainError("encode_envelope: empty active segment set");

  const double ymin = env.lower.min_on(lo, hi);
  const double ymax = env.upper.max_on(lo, hi);
  VarId y = m.add_continuous(ymin, ymax);

  const auto line = [&](const std::vector<double>& v, std::size_t s) {
    const double h = knots[s + 1] - knots[s];
    const double alpha = (v[s + 1] - v[s]) / h;
    const double beta = v[s] - alpha * knots[s];
    return std::pair{alpha, beta};
  };

  if (active.size() == 1) {
    const std::size_t s = active[0];
    const auto [al, bl] = line(lov, s);
    const auto [au, bu] = line(upv, s);
    // Keep x inside the certified interval even if its variable bounds are
    // wider; the lines extrapolate outside the segment.
    const Interval vb = m.bounds(x);
    if (vb.lo < lo)
      m.add_constraint(LinExpr::of(x), Sense::Ge, lo);
    if (vb.hi > hi)
      m.add_constraint(LinExpr::of(x), Sense::Le, hi);
    m.add_constraint(LinExpr::of(y).add(-al, x), Sense::Ge, bl);
    m.add_constraint(LinExpr::of(y).add(-au, x), Sense::Le, bu);
    return y;
  }

  // Disaggregated (multiple-choice) form: per segment a scaled copy
  // (x_s, y_s) that collapses to zero unless its indicator is selected. The
  // LP relaxation is the convex hull of the segment bands, which is what
  // lets branch and bound move the bound without resolving every indicator.
  LinExpr pick;
  LinExpr xsum = LinExpr::of(x, -1.0);
  LinExpr ysum = LinExpr::of(y, -1.0);
  std::vector<VarId> group;
  for (const std::size_t s : active) {
    const double xl = std::max(knots[s], lo);
    const double xu = std::min(knots[s + 1], hi);
    const auto [al, bl] = line(lov, s);
    const auto [au, bu] = line(upv, s);
    const double yl = std::min(al * xl + bl, al * xu + bl);
    const double yu = std::max(au * xl + bu, au * xu + bu);

    VarId d = m.add_binary();
    VarId xs = m.add_continuous(std::min(0.0, xl), std::max(0.0, xu));
    VarId ys = m.add_continuous(std::min(0.0, yl), std::max(0.0, yu));
    pick.add(1.0, d);
    group.push_back(d);
    xsum.add(1.0, xs);
    ysum.add(1.0, ys);
    // x_s in d * [xl, xu]
    m.add_constraint(LinExpr::of(xs).add(-xl, d), Sense::Ge, 0.0);
    m.add_constraint(LinExpr::of(xs).add(-xu, d), Sense::Le, 0.0);
    // y_s between the segment lines, homogenized by d.
    m.add_constraint(LinExpr::of(ys).add(-al, xs).add(-bl, d), Sense::Ge, 0.0);
    m.add_constraint(LinExpr::of(ys).add(-au, xs).add(-bu, d), Sense::Le, 0.0);
  }
  m.add_constraint(pick, Sense::Eq, 1.0);
  m.add_constraint(xsum, Sense::Eq, 0.0);
  m.add_constraint(ysum, Sense::Eq, 0.0);
  m.register_sos1(std::move(group));
  return y;
}

nlohmann::json envelope_to_json(const PwlEnvelope& env) {
  return nlohmann::json{{"domain", {env.domain_lo, env.domain_hi}},
                        {"knots", env.lower.knots()},
                        {"lower", env.lower.values()},
                        {"upper", env.upper.values()},
                        {"certified_rel_error", env.certified_rel_error}};
}

PwlEnvelope envelope_from_json(const nlohmann::json& j) {
  const auto knots = j.at("knots").get<std::vector<double>>();
  PwlEnvelope env{j.at("domain").at(0).get<double>(),
                  j.at("domain").at(1).get<double>(),
                  PwlFunction(knots, j.at("lower").get<std::vector<double>>()),
                  PwlFunction(knots, j.at("upper").get<std::vector<double>>()),
                  j.at("certified_rel_error").get<double>()};
  return env;
}

} // namespace nflreach
