#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "nflreach/backreach.hpp"

namespace nflreach {

// 2-D rendering of a backreach result: goal polygon, per-step balls
// (squares for p=inf, diamonds for p=1) colour-ramped by t, optional
// start-set overlays.
struct PlotSpec {
  std::vector<int> steps; // empty = all
  std::optional<std::pair<double, double>> xlim;
  std::optional<std::pair<double, double>> ylim;
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> start_boxes;
  int width_px = 640;
  int height_px = 520;
};

// Requires result.state_dim == 2; throws ConfigError otherwise.
void write_plot_svg(const BackreachResult& result, const PlotSpec& spec,
                    std::ostream& os);

// Ball geometry for external plotting: t,index,center...,radius,p per row.
void write_ball_csv(const BackreachResult& result, std::ostream& os);

} // namespace nflreach
