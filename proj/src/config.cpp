#include "nflreach/config.hpp"

#include <algorithm>
#include <fstream>

namespace nflreach {

void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + ": expected an object");
  for (const char* k : required)
    if (!j.contains(k))
      throw ConfigError(std::string(where) + ": missing required key '" + k +
                        "'");
  for (const auto& [key, _] : j.items()) {
    const auto match = [&key](const char* k) { return key == k; };
    if (std::none_of(required.begin(), required.end(), match) &&
        std::none_of(optional.begin(), optional.end(), match))
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

namespace {

Eigen::VectorXd vec_from(const nlohmann::json& j, const char* where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(where) + ": expected a non-empty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(std::string(where) + ": entry " + std::to_string(i) +
                        " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd mat_from(const nlohmann::json& j, const char* where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(where) + ": expected a non-empty matrix");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(std::string(where) + ": ragged row " +
                        std::to_string(i));
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j[i][k].get<double>();
  }
  return m;
}

double param(const nlohmann::json& params, const char* name,
             const char* dynamics) {
  if (!params.contains(name))
    throw ConfigError(std::string("system.params: dynamics '") + dynamics +
                      "' requires parameter '" + name + "'");
  return params[name].get<double>();
}

DynamicsTemplate dynamics_from_json(const nlohmann::json& sys) {
  const std::string name = sys.at("dynamics").get<std::string>();
  const nlohmann::json params =
      sys.contains("params") ? sys["params"] : nlohmann::json::object();

  if (name == "affine") {
    if (!sys.contains("matrices"))
      throw ConfigError("system: affine dynamics require a 'matrices' block");
    const auto& mj = sys["matrices"];
    check_keys(mj, "system.matrices", {"A", "B"}, {"c"});
    const Eigen::MatrixXd A = mat_from(mj["A"], "system.matrices.A");
    const Eigen::MatrixXd B = mat_from(mj["B"], "system.matrices.B");
    const Eigen::VectorXd c = mj.contains("c")
                                  ? vec_from(mj["c"], "system.matrices.c")
                                  : Eigen::VectorXd::Zero(A.rows()).eval();
    return make_affine(A, B, c);
  }
  if (name == "unicycle_heading") {
    check_keys(params, "system.params", {"v"}, {});
    return make_unicycle(param(params, "v", "unicycle_heading"));
  }
  if (name == "pendulum") {
    check_keys(params, "system.params", {"dt", "g_over_l"}, {});
    return make_pendulum(param(params, "dt", "pendulum"),
                         param(params, "g_over_l", "pendulum"));
  }
  throw ConfigError("unknown dynamics '" + name +
                    "' (known: affine, unicycle_heading, pendulum)");
}

Polytope goal_from_json(const nlohmann::json& gj) {
  check_keys(gj, "goal", {}, {"box", "A", "b"});
  if (gj.contains("box")) {
    if (gj.contains("A") || gj.contains("b"))
      throw ConfigError("goal: give either 'box' or 'A'/'b', not both");
    check_keys(gj["box"], "goal.box", {"lower", "upper"}, {});
    return Polytope::box(vec_from(gj["box"]["lower"], "goal.box.lower"),
                         vec_from(gj["box"]["upper"], "goal.box.upper"));
  }
  if (!gj.contains("A") || !gj.contains("b"))
    throw ConfigError("goal: expected 'box' or both 'A' and 'b'");
  return Polytope(mat_from(gj["A"], "goal.A"), vec_from(gj["b"], "goal.b"));
}

} // namespace

RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir) {
  check_keys(j, "config", {"system", "goal", "reach"}, {"coverage"});

  const auto& sys = j["system"];
  check_keys(sys, "system", {"dynamics", "network", "domain"},
             {"params", "matrices"});
  check_keys(sys["domain"], "system.domain", {"lower", "upper"}, {});

  DynamicsTemplate dyn = dynamics_from_json(sys);

  std::filesystem::path net_path = sys["network"].get<std::string>();
  if (net_path.is_relative())
    net_path = base_dir / net_path;
  NeuralNetwork controller = load_network(net_path);

  NeuralFeedbackLoop nfl{std::move(dyn), std::move(controller),
                         vec_from(sys["domain"]["lower"],
                                  "system.domain.lower"),
                         vec_from(sys["domain"]["upper"],
                                  "system.domain.upper")};
  nfl.validate();

  GoalSet goal{goal_from_json(j["goal"])};
  if (goal.poly.dim() != nfl.dynamics.state_dim)
    throw ConfigError("goal dimension does not match the state dimension");

  const auto& rj = j["reach"];
  check_keys(rj, "reach", {"horizon", "samples_per_step"},
             {"norm", "rel_tol", "rejection_cap", "solver"});
  ReachConfig reach;
  reach.horizon = rj["horizon"].get<int>();
  reach.samples_per_step = rj["samples_per_step"].get<int>();
  if (rj.contains("norm")) {
    const std::string p = rj["norm"].get<std::string>();
    if (p == "inf")
      reach.norm = Norm::Linf;
    else if (p == "l1")
      reach.norm = Norm::L1;
    else
      throw ConfigError("reach.norm: expected 'inf' or 'l1', got '" + p + "'");
  }
  if (rj.contains("rel_tol"))
    reach.rel_tol = rj["rel_tol"].get<double>();
  if (rj.contains("rejection_cap"))
    reach.rejection_cap = rj["rejection_cap"].get<std::int64_t>();
  if (rj.contains("solver")) {
    const auto& sj = rj["solver"];
    check_keys(sj, "reach.solver", {},
               {"feas_tol", "gap_tol", "int_tol", "node_limit",
                "time_limit_s"});
    if (sj.contains("feas_tol"))
      reach.solver.feas_tol = sj["feas_tol"].get<double>();
    if (sj.contains("gap_tol"))
      reach.solver.gap_tol = sj["gap_tol"].get<double>();
    if (sj.contains("int_tol"))
      reach.solver.int_tol = sj["int_tol"].get<double>();
    if (sj.contains("node_limit"))
      reach.solver.node_limit = sj["node_limit"].get<std::int64_t>();
    if (sj.contains("time_limit_s"))
      reach.solver.time_limit_s = sj["time_limit_s"].get<double>();
  }
  reach.validate();

  RunConfig rc{std::move(nfl), std::move(goal), reach, 10000, 0, j};
  if (j.contains("coverage")) {
    check_keys(j["coverage"], "coverage", {}, {"samples", "seed"});
    if (j["coverage"].contains("samples"))
      rc.coverage_samples = j["coverage"]["samples"].get<std::int64_t>();
    if (j["coverage"].contains("seed"))
      rc.coverage_seed = j["coverage"]["seed"].get<std::uint64_t>();
    if (rc.coverage_samples < 1)
      throw ConfigError("coverage.samples must be >= 1");
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() +
                      " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

} // namespace nflreach
