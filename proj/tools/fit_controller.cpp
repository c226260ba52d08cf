// Builds the substitute unicycle heading policy checked into fixtures/:
// a 2-10-10-10-1 ReLU network fitted to a proportional goal-seeking heading
// law (bearing to the goal center) by regularized least squares on grid
// data. Hidden weights are fixed deterministic ridge features and only a
// linear readout is fitted, so the whole procedure is reproducible without
// any ML framework.
//
// The readout is routed through a ReLU clamp built from the spare units of
// layers 2 and 3:
//   u2 = relu(theta_raw - lo),  u3 = relu((hi - lo) - u2),  theta = hi - u3,
// which pins the commanded heading to [lo, hi] so interval propagation of
// the closed loop cannot blow up the envelope domains.

#include <cmath>
#include <iostream>

#include "CLI11.hpp"

#include "nflreach/network.hpp"
#include "nflreach/nfl.hpp"

using namespace nflreach;

namespace {

constexpr int kHidden = 10;

// Bearing to the goal wrapped to [-pi/2, 3pi/2) so the branch cut sits in
// the rarely visited region straight above the goal.
double bearing(double x, double y, double gx, double gy) {
  double th = std::atan2(gy - y, gx - x);
  if (th < -M_PI / 2.0)
    th += 2.0 * M_PI;
  return th;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"fit the substitute unicycle heading policy"};
  double gx = 5.0, gy = 6.5;
  double v = 1.0;
  std::vector<double> domain{-3.5, 2.5, 6.5, 7.5}; // lo_x lo_y hi_x hi_y
  double theta_lo = -0.45, theta_hi = 2.1;
  double ridge = 1e-3;
  int grid = 41;
  int horizon = 7;
  std::string out = "fixtures/unicycle_policy.json";
  app.add_option("--goal-x", gx);
  app.add_option("--goal-y", gy);
  app.add_option("--v", v, "speed used only for the reach diagnostics");
  app.add_option("--domain", domain, "lo_x lo_y hi_x hi_y")->expected(4);
  app.add_option("--theta-lo", theta_lo, "heading clamp lower bound");
  app.add_option("--theta-hi", theta_hi, "heading clamp upper bound");
  app.add_option("--ridge", ridge, "least-squares regularization");
  app.add_option("--grid", grid, "fitting grid resolution per axis");
  app.add_option("--horizon", horizon, "diagnostic rollout length");
  app.add_option("-o,--out", out, "output network JSON");
  CLI11_PARSE(app, argc, argv);

  const double lox = domain[0], loy = domain[1], hix = domain[2],
               hiy = domain[3];
  const Eigen::Vector2d center((lox + hix) / 2.0, (loy + hiy) / 2.0);
  const Eigen::Vector2d half((hix - lox) / 2.0, (hiy - loy) / 2.0);

  // Layer 1: ten ridge directions with kink lines anchored inside the box.
  Layer l1;
  l1.W.resize(kHidden, 2);
  l1.b.resize(kHidden);
  l1.act = Activation::Relu;
  const double s1 = 0.35;
  for (int i = 0; i < kHidden; ++i) {
    const double phi = 2.0 * M_PI * i / kHidden;
    const Eigen::Vector2d u(std::cos(phi), std::sin(phi));
    const Eigen::Vector2d anchor =
        center + 0.5 * half.cwiseProduct(Eigen::Vector2d(
                           std::cos(phi + 0.7), std::sin(phi + 0.7)));
    l1.W.row(i) = s1 * u.transpose();
    l1.b(i) = -s1 * u.dot(anchor);
  }

  const auto features = [&l1](const Eigen::Vector2d& x) {
    return ((l1.W * x + l1.b).cwiseMax(0.0)).eval();
  };

  // Linear readout of the layer-1 features by regularized least squares.
  const int npts = grid * grid;
  Eigen::MatrixXd Phi(npts, kHidden + 1);
  Eigen::VectorXd target(npts);
  int row = 0;
  for (int iy = 0; iy < grid; ++iy) {
    for (int ix = 0; ix < grid; ++ix) {
      const double x = lox + (hix - lox) * ix / (grid - 1);
      const double y = loy + (hiy - loy) * iy / (grid - 1);
      Phi.row(row).head(kHidden) = features({x, y}).transpose();
      Phi(row, kHidden) = 1.0;
      target(row) = std::clamp(bearing(x, y, gx, gy), theta_lo, theta_hi);
      ++row;
    }
  }
  Eigen::MatrixXd gram = Phi.transpose() * Phi;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd w = gram.ldlt().solve(Phi.transpose() * target);

  // Layer 2: unit 0 starts the clamp, relu(theta_raw - lo); the spare units
  // are constant-positive so they stay stable and cost no binaries.
  Layer l2;
  l2.W = Eigen::MatrixXd::Zero(kHidden, kHidden);
  l2.b = Eigen::VectorXd::Constant(kHidden, 1.0);
  l2.act = Activation::Relu;
  l2.W.row(0) = w.head(kHidden).transpose();
  l2.b(0) = w(kHidden) - theta_lo;

  // Layer 3: unit 0 finishes the clamp, relu((hi - lo) - u2).
  Layer l3;
  l3.W = Eigen::MatrixXd::Zero(kHidden, kHidden);
  l3.b = Eigen::VectorXd::Constant(kHidden, 1.0);
  l3.act = Activation::Relu;
  l3.W(0, 0) = -1.0;
  l3.b(0) = theta_hi - theta_lo;

  // Output: theta = hi - u3.
  Layer l4;
  l4.W = Eigen::MatrixXd::Zero(1, kHidden);
  l4.W(0, 0) = -1.0;
  l4.b = Eigen::VectorXd::Constant(1, theta_hi);
  l4.act = Activation::Linear;

  const NeuralNetwork nn({l1, l2, l3, l4});
  save_network(nn, out);

  // Diagnostics.
  const double rms = std::sqrt((Phi * w - target).squaredNorm() / npts);
  std::cout << "fit rms error (pre-clamp): " << rms << " rad\n";
  std::cout << "readout weight norm: " << w.head(kHidden).norm() << "\n";

  NeuralFeedbackLoop nfl{make_unicycle(v), nn, Eigen::Vector2d(lox, loy),
                         Eigen::Vector2d(hix, hiy)};
  nfl.validate();
  const Eigen::Vector2d glo(gx - 1.0, gy - 0.5), ghi(gx + 1.0, gy + 0.5);
  std::vector<int> hits(horizon + 1, 0);
  int reach_any = 0;
  const int sim_grid = 60;
  for (int iy = 0; iy < sim_grid; ++iy) {
    for (int ix = 0; ix < sim_grid; ++ix) {
      Eigen::VectorXd x(2);
      x << lox + (hix - lox) * ix / (sim_grid - 1),
          loy + (hiy - loy) * iy / (sim_grid - 1);
      bool any = false;
      for (int t = 1; t <= horizon; ++t) {
        x = nfl.closed_loop_step(x);
        const bool in_goal = x(0) >= glo(0) && x(0) <= ghi(0) &&
                             x(1) >= glo(1) && x(1) <= ghi(1);
        if (in_goal) {
          ++hits[t];
          any = true;
        }
      }
      if (any)
        ++reach_any;
    }
  }
  const double tot = sim_grid * sim_grid;
  std::cout << "fraction of D reaching the goal box within " << horizon
            << " steps: " << reach_any / tot << "\n";
  for (int t = 1; t <= horizon; ++t)
    std::cout << "  in goal at exactly t=" << t << ": " << hits[t] / tot
              << "\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}
