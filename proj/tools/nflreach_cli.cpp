#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "nflreach/config.hpp"
#include "nflreach/svg_plot.hpp"
#include "nflreach/verify.hpp"

namespace fs = std::filesystem;
using namespace nflreach;

namespace {

// Exit-code contract: 0 success (check: subset), 1 compute error,
// 2 config/schema error, 3 check found a counterexample.
enum ExitCode { kOk = 0, kComputeError = 1, kConfigError = 2, kNotSubset = 3 };

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kComputeError;
  }
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  out << contents;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

Polytope start_polytope(const std::vector<double>& box_vals,
                        const std::string& file, int expected_dim) {
  if (!box_vals.empty() && !file.empty())
    throw ConfigError("give either --box or --start-set, not both");
  if (!box_vals.empty()) {
    const int n = static_cast<int>(box_vals.size()) / 2;
    if (static_cast<int>(box_vals.size()) != 2 * n || n != expected_dim)
      throw ConfigError("--box expects " + std::to_string(2 * expected_dim) +
                        " values: lower coordinates then upper coordinates");
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      lo(i) = box_vals[i];
      hi(i) = box_vals[n + i];
    }
    return Polytope::box(lo, hi);
  }
  if (file.empty())
    throw ConfigError("a start set is required: --box or --start-set");
  const nlohmann::json j = read_json(file);
  check_keys(j, "start set", {}, {"box", "A", "b"});
  if (j.contains("box")) {
    check_keys(j["box"], "start.box", {"lower", "upper"}, {});
    const auto lo = j["box"]["lower"].get<std::vector<double>>();
    const auto hi = j["box"]["upper"].get<std::vector<double>>();
    return Polytope::box(
        Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size()),
        Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size()));
  }
  if (!j.contains("A") || !j.contains("b"))
    throw ConfigError("start set file needs 'box' or 'A' and 'b'");
  const auto bj = j["b"].get<std::vector<double>>();
  Eigen::MatrixXd A(j["A"].size(), j["A"][0].size());
  for (Eigen::Index r = 0; r < A.rows(); ++r)
    for (Eigen::Index cidx = 0; cidx < A.cols(); ++cidx)
      A(r, cidx) = j["A"][r][cidx].get<double>();
  return Polytope(A, Eigen::Map<const Eigen::VectorXd>(bj.data(), bj.size()));
}

int cmd_reach(const std::string& config_path, const std::string& out_path,
              std::string timing_path) {
  const RunConfig rc = load_run_config(config_path);
  const BackreachResult result = run_backreach(rc.nfl, rc.goal, rc.reach);
  write_file(out_path, result_to_json(result).dump(1) + "\n");
  if (timing_path.empty())
    timing_path = out_path + ".timing.json";
  write_file(timing_path, timing_to_json(result).dump(1) + "\n");
  std::cout << "wrote " << out_path << " (" << result.total_balls()
            << " balls over " << result.steps.size() << " steps)\n";
  for (const auto& s : result.steps)
    for (const auto& e : s.errors)
      std::cerr << "warning: " << e << "\n";
  return kOk;
}

int cmd_check(const std::string& result_path,
              const std::vector<double>& box_vals, const std::string& set_file,
              std::int64_t node_limit) {
  const BackreachResult result = result_from_json(read_json(result_path));
  StartSet start{start_polytope(box_vals, set_file, result.state_dim)};
  SolveOptions opts;
  opts.node_limit = node_limit;
  const CheckVerdict v = check_goal_reaching(start, result, opts);
  std::cout << verdict_to_json(v).dump(1) << "\n";
  if (v.subset)
    return kOk;
  std::ostringstream w;
  w << v.witness.transpose();
  std::cerr << "not a subset; witness: " << w.str() << "\n";
  return kNotSubset;
}

int cmd_coverage(const std::string& result_path, const std::string& config_path,
                 std::int64_t samples, std::uint64_t seed, bool have_seed,
                 const std::string& out_json, const std::string& out_csv,
                 bool csv_header) {
  const BackreachResult result = result_from_json(read_json(result_path));
  const RunConfig rc = load_run_config(config_path);
  const std::int64_t n = samples > 0 ? samples : rc.coverage_samples;
  const std::uint64_t s = have_seed ? seed : rc.coverage_seed;
  if (n < 1)
    throw ConfigError("coverage sample count must be >= 1");
  const CoverageReport rep = estimate_coverage(rc.nfl, rc.goal, result, n, s);
  const std::string json_text = coverage_to_json(rep).dump(1) + "\n";
  if (out_json.empty())
    std::cout << json_text;
  else
    write_file(out_json, json_text);
  if (!out_csv.empty()) {
    std::ostringstream os;
    coverage_to_csv(rep, result.config.samples_per_step, os, csv_header);
    write_file(out_csv, os.str());
  }
  return kOk;
}

int cmd_plot(const std::string& result_path, const std::string& out_path,
             const std::vector<int>& steps, const std::vector<double>& xlim,
             const std::vector<double>& ylim,
             const std::vector<double>& start_boxes,
             const std::string& csv_path) {
  const BackreachResult result = result_from_json(read_json(result_path));
  if (result.state_dim != 2)
    throw ConfigError("plot requires a 2-D result, got state_dim " +
                      std::to_string(result.state_dim));
  PlotSpec spec;
  spec.steps = steps;
  if (!xlim.empty()) {
    if (xlim.size() != 2)
      throw ConfigError("--xlim expects two values");
    spec.xlim = {{xlim[0], xlim[1]}};
  }
  if (!ylim.empty()) {
    if (ylim.size() != 2)
      throw ConfigError("--ylim expects two values");
    spec.ylim = {{ylim[0], ylim[1]}};
  }
  if (start_boxes.size() % 4 != 0)
    throw ConfigError("--start-box expects groups of four values "
                      "(lo_x lo_y hi_x hi_y)");
  for (std::size_t i = 0; i + 3 < start_boxes.size(); i += 4)
    spec.start_boxes.push_back({{start_boxes[i], start_boxes[i + 1]},
                                {start_boxes[i + 2], start_boxes[i + 3]}});
  std::ostringstream os;
  write_plot_svg(result, spec, os);
  write_file(out_path, os.str());
  if (!csv_path.empty()) {
    std::ostringstream cs;
    write_ball_csv(result, cs);
    write_file(csv_path, cs.str());
  }
  return kOk;
}

int cmd_export_lp(const std::string& config_path, int step,
                  const std::string& center_str, const std::string& out_path) {
  const RunConfig rc = load_run_config(config_path);
  if (step < 1 || step > rc.reach.horizon)
    throw ConfigError("--step must be in 1.." +
                      std::to_string(rc.reach.horizon));
  const Abstraction abs =
      prepare_abstraction(rc.nfl, rc.reach.horizon, rc.reach.rel_tol);

  Eigen::VectorXd center;
  if (!center_str.empty()) {
    std::vector<double> vals;
    std::stringstream ss(center_str);
    std::string tok;
    while (std::getline(ss, tok, ','))
      vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != rc.nfl.dynamics.state_dim)
      throw ConfigError("--center needs " +
                        std::to_string(rc.nfl.dynamics.state_dim) +
                        " comma-separated values");
    center = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                               static_cast<Eigen::Index>(
                                                   vals.size()));
  } else {
    SobolSampler sampler(rc.nfl.dynamics.state_dim);
    center = sample_center(sampler, rc.goal, rc.nfl, step,
                           rc.reach.rejection_cap);
  }

  MilpModel m;
  const RolloutVars vars =
      encode_rollout(m, rc.nfl, abs.envelopes, step, abs.cache);
  const double diam = rc.reach.norm == Norm::Linf
                          ? (rc.nfl.domain_hi - rc.nfl.domain_lo).maxCoeff()
                          : (rc.nfl.domain_hi - rc.nfl.domain_lo).sum();
  const VarId eps = m.add_continuous(0.0, diam, "eps");
  add_norm_le(m, vars.initial(), center, eps, rc.reach.norm);
  add_not_in_interior(m, vars.final_state(), rc.goal.poly,
                      abs.cache.steps[step - 1].state_out);
  m.set_objective(LinExpr::of(eps), ObjSense::Minimize);

  std::ostringstream os;
  m.write_lp(os);
  write_file(out_path, os.str());
  std::cout << "wrote " << out_path << " (" << m.num_vars() << " vars, "
            << m.num_binaries() << " binaries, " << m.num_rows() << " rows)\n";
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underapproximate backward reachability for neural feedback "
               "loops"};
  app.require_subcommand(1);

  auto* reach = app.add_subcommand("reach",
                                   "compute backward reachable ball unions");
  std::string reach_config, reach_out, reach_timing;
  reach->add_option("config", reach_config, "run config JSON")->required();
  reach->add_option("-o,--out", reach_out, "result JSON path")->required();
  reach->add_option("--timing", reach_timing,
                    "timing sidecar path (default: <out>.timing.json)");

  auto* check =
      app.add_subcommand("check", "check a start set against a result");
  std::string check_result, check_set_file;
  std::vector<double> check_box;
  std::int64_t check_nodes = 200000;
  check->add_option("result", check_result, "result JSON path")->required();
  check->add_option("--box", check_box,
                    "start box: lower coordinates then upper coordinates");
  check->add_option("--start-set", check_set_file,
                    "start set JSON ({box:{lower,upper}} or {A,b})");
  check->add_option("--node-limit", check_nodes, "solver node limit");

  auto* cov = app.add_subcommand("coverage",
                                 "estimate volume-fraction coverage");
  std::string cov_result, cov_config, cov_json, cov_csv;
  std::int64_t cov_n = 0;
  std::uint64_t cov_seed = 0;
  bool cov_header = false;
  cov->add_option("result", cov_result, "result JSON path")->required();
  cov->add_option("config", cov_config, "run config JSON")->required();
  cov->add_option("-n,--samples", cov_n, "samples per timestep");
  auto* seed_opt = cov->add_option("--seed", cov_seed, "RNG seed");
  cov->add_option("-o,--out", cov_json, "coverage JSON path (default stdout)");
  cov->add_option("--csv", cov_csv, "coverage CSV path");
  cov->add_flag("--csv-header", cov_header, "emit the CSV header line");

  auto* plot = app.add_subcommand("plot", "render a 2-D result to SVG");
  std::string plot_result, plot_out, plot_csv;
  std::vector<int> plot_steps;
  std::vector<double> plot_xlim, plot_ylim, plot_boxes;
  plot->add_option("result", plot_result, "result JSON path")->required();
  plot->add_option("-o,--out", plot_out, "SVG output path")->required();
  plot->add_option("--steps", plot_steps, "subset of steps to draw");
  plot->add_option("--xlim", plot_xlim, "x axis range");
  plot->add_option("--ylim", plot_ylim, "y axis range");
  plot->add_option("--start-box", plot_boxes,
                   "overlay box (lo_x lo_y hi_x hi_y), repeatable");
  plot->add_option("--csv", plot_csv, "also write ball geometry CSV");

  auto* exp =
      app.add_subcommand("export-lp", "dump one ball MILP in CPLEX-LP format");
  std::string exp_config, exp_center, exp_out;
  int exp_step = 1;
  exp->add_option("config", exp_config, "run config JSON")->required();
  exp->add_option("--step", exp_step, "timestep t")->required();
  exp->add_option("--center", exp_center,
                  "ball center, comma separated (default: first accepted "
                  "sample)");
  exp->add_option("-o,--out", exp_out, "LP output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (reach->parsed())
    return guarded(
        [&] { return cmd_reach(reach_config, reach_out, reach_timing); });
  if (check->parsed())
    return guarded([&] {
      return cmd_check(check_result, check_box, check_set_file, check_nodes);
    });
  if (cov->parsed())
    return guarded([&] {
      return cmd_coverage(cov_result, cov_config, cov_n, cov_seed,
                          seed_opt->count() > 0, cov_json, cov_csv, cov_header);
    });
  if (plot->parsed())
    return guarded([&] {
      return cmd_plot(plot_result, plot_out, plot_steps, plot_xlim, plot_ylim,
                      plot_boxes, plot_csv);
    });
  if (exp->parsed())
    return guarded([&] {
      return cmd_export_lp(exp_config, exp_step, exp_center, exp_out);
    });
  return kConfigError;
}
