#include "nflreach/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace nflreach {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Vertices of a bounded 2-D polytope: intersect facet pairs, keep feasible
// points, order by angle around the centroid.
std::vector<Eigen::Vector2d> polygon_vertices(const Eigen::MatrixXd& A,
                                              const Eigen::VectorXd& b) {
  std::vector<Eigen::Vector2d> pts;
  const Eigen::Index m = A.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      Eigen::Matrix2d M;
      M << A(i, 0), A(i, 1), A(j, 0), A(j, 1);
      if (std::abs(M.determinant()) < 1e-12)
        continue;
      const Eigen::Vector2d p = M.inverse() * Eigen::Vector2d(b(i), b(j));
      if (((A * p - b).array() <= 1e-9).all())
        pts.push_back(p);
    }
  }
  if (pts.empty())
    return pts;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts)
    c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(),
            [&c](const Eigen::Vector2d& a, const Eigen::Vector2d& b2) {
              return std::atan2(a.y() - c.y(), a.x() - c.x()) <
                     std::atan2(b2.y() - c.y(), b2.x() - c.x());
            });
  return pts;
}

// Blue-to-orange ramp over [0, 1].
std::string ramp_color(double f) {
  f = std::clamp(f, 0.0, 1.0);
  const int r = static_cast<int>(40 + f * (230 - 40));
  const int g = static_cast<int>(90 + f * (140 - 90));
  const int bl = static_cast<int>(200 - f * (200 - 30));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)", r, g, bl);
  return buf;
}

struct Mapper {
  double x0, x1, y0, y1;
  double px, py, pw, ph;
  double mx(double x) const { return px + (x - x0) / (x1 - x0) * pw; }
  double my(double y) const { return py + ph - (y - y0) / (y1 - y0) * ph; }
};

} // namespace

void write_plot_svg(const BackreachResult& result, const PlotSpec& spec,
                    std::ostream& os) {
  if (result.state_dim != 2)
    throw ConfigError("plot requires a 2-D state space");

  const auto wanted = [&spec](int t) {
    return spec.steps.empty() ||
           std::find(spec.steps.begin(), spec.steps.end(), t) !=
               spec.steps.end();
  };

  // Data extents: goal, balls, overlays.
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  const auto grow = [&](double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  const auto goal_pts = polygon_vertices(result.goal_A, result.goal_b);
  for (const auto& p : goal_pts)
    grow(p.x(), p.y());
  for (const auto& s : result.steps) {
    if (!wanted(s.t))
      continue;
    for (const auto& b : s.balls) {
      grow(b.center(0) - b.radius, b.center(1) - b.radius);
      grow(b.center(0) + b.radius, b.center(1) + b.radius);
    }
  }
  for (const auto& [lo, hi] : spec.start_boxes) {
    grow(lo.x(), lo.y());
    grow(hi.x(), hi.y());
  }
  if (x0 > x1) { // empty result: fall back to the domain box
    grow(result.domain_lo(0), result.domain_lo(1));
    grow(result.domain_hi(0), result.domain_hi(1));
  }
  const double mx = 0.06 * std::max(x1 - x0, 1e-9);
  const double my = 0.06 * std::max(y1 - y0, 1e-9);
  x0 -= mx;
  x1 += mx;
  y0 -= my;
  y1 += my;
  if (spec.xlim) {
    x0 = spec.xlim->first;
    x1 = spec.xlim->second;
  }
  if (spec.ylim) {
    y0 = spec.ylim->first;
    y1 = spec.ylim->second;
  }

  const Mapper map{x0, x1, y0, y1, 52.0, 12.0,
                   static_cast<double>(spec.width_px) - 66.0,
                   static_cast<double>(spec.height_px) - 52.0};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width_px
     << "\" height=\"" << spec.height_px << "\" viewBox=\"0 0 "
     << spec.width_px << " " << spec.height_px << "\">\n";
  os << "<rect x=\"" << num(map.px) << "\" y=\"" << num(map.py) << "\" width=\""
     << num(map.pw) << "\" height=\"" << num(map.ph)
     << "\" fill=\"white\" stroke=\"black\"/>\n";

  // Ticks.
  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    os << "<line x1=\"" << num(map.mx(fx)) << "\" y1=\"" << num(map.py + map.ph)
       << "\" x2=\"" << num(map.mx(fx)) << "\" y2=\""
       << num(map.py + map.ph + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(map.mx(fx)) << "\" y=\""
       << num(map.py + map.ph + 16)
       << "\" font-size=\"10\" text-anchor=\"middle\">" << num(fx)
       << "</text>\n";
    os << "<line x1=\"" << num(map.px - 4) << "\" y1=\"" << num(map.my(fy))
       << "\" x2=\"" << num(map.px) << "\" y2=\"" << num(map.my(fy))
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(map.px - 7) << "\" y=\"" << num(map.my(fy) + 3)
       << "\" font-size=\"10\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }

  // Goal polygon.
  if (!goal_pts.empty()) {
    os << "<polygon class=\"goal\" points=\"";
    for (const auto& p : goal_pts)
      os << num(map.mx(p.x())) << "," << num(map.my(p.y())) << " ";
    os << "\" fill=\"rgb(120,200,120)\" fill-opacity=\"0.55\" "
          "stroke=\"rgb(30,120,30)\"/>\n";
  }

  // Balls, earliest step on top of latest.
  const int k = result.config.horizon;
  for (auto it = result.steps.rbegin(); it != result.steps.rend(); ++it) {
    if (!wanted(it->t))
      continue;
    const std::string color =
        ramp_color(k > 1 ? static_cast<double>(it->t - 1) / (k - 1) : 0.0);
    for (const auto& b : it->balls) {
      const double cx = b.center(0), cy = b.center(1), r = b.radius;
      if (b.p == Norm::Linf) {
        os << "<rect class=\"ball\" data-t=\"" << it->t << "\" x=\""
           << num(map.mx(cx - r)) << "\" y=\"" << num(map.my(cy + r))
           << "\" width=\"" << num(map.mx(cx + r) - map.mx(cx - r))
           << "\" height=\"" << num(map.my(cy - r) - map.my(cy + r))
           << "\" fill=\"" << color << "\" fill-opacity=\"0.45\" stroke=\""
           << color << "\"/>\n";
      } else {
        os << "<polygon class=\"ball\" data-t=\"" << it->t << "\" points=\""
           << num(map.mx(cx + r)) << "," << num(map.my(cy)) << " "
           << num(map.mx(cx)) << "," << num(map.my(cy + r)) << " "
           << num(map.mx(cx - r)) << "," << num(map.my(cy)) << " "
           << num(map.mx(cx)) << "," << num(map.my(cy - r)) << "\" fill=\""
           << color << "\" fill-opacity=\"0.45\" stroke=\"" << color
           << "\"/>\n";
      }
    }
  }

  // Start-set overlays.
  for (const auto& [lo, hi] : spec.start_boxes) {
    os << "<rect class=\"start\" x=\"" << num(map.mx(lo.x())) << "\" y=\""
       << num(map.my(hi.y())) << "\" width=\""
       << num(map.mx(hi.x()) - map.mx(lo.x())) << "\" height=\""
       << num(map.my(lo.y()) - map.my(hi.y()))
       << "\" fill=\"none\" stroke=\"red\" stroke-dasharray=\"5,3\"/>\n";
  }

  os << "</svg>\n";
}

void write_ball_csv(const BackreachResult& result, std::ostream& os) {
  os << "t,index";
  for (int i = 0; i < result.state_dim; ++i)
    os << ",c" << i;
  os << ",radius,p\n";
  for (const auto& s : result.steps) {
    for (std::size_t i = 0; i < s.balls.size(); ++i) {
      const auto& b = s.balls[i];
      os << s.t << "," << i;
      char buf[32];
      for (Eigen::Index d = 0; d < b.center.size(); ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", b.center(d));
        os << "," << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", b.radius);
      os << "," << buf << "," << (b.p == Norm::Linf ? "inf" : "l1") << "\n";
    }
  }
}

} // namespace nflreach
