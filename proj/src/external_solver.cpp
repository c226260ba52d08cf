#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nflreach/milp_solver.hpp"

namespace nflreach {

namespace {

std::string replace_all(std::string s, const std::string& what,
                        const std::string& with) {
  std::size_t pos = 0;
  while ((pos = s.find(what, pos)) != std::string::npos) {
    s.replace(pos, what.size(), with);
    pos += with.size();
  }
  return s;
}

std::filesystem::path temp_file(const char* suffix) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path();
  return dir / ("nflreach_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++) + suffix);
}

} // namespace

ExternalCommandSolver::ExternalCommandSolver(std::string command_template)
    : command_template_(std::move(command_template)) {
  if (command_template_.find("{lp}") == std::string::npos ||
      command_template_.find("{sol}") == std::string::npos)
    throw ConfigError("external solver command must contain {lp} and {sol}");
}

Solution ExternalCommandSolver::solve(const MilpModel& model,
                                      const SolveOptions& opts) {
  const auto lp_path = temp_file(".lp");
  const auto sol_path = temp_file(".sol");
  {
    std::ofstream lp(lp_path);
    if (!lp)
      throw SolveError("cannot write LP file " + lp_path.string());
    model.write_lp(lp);
  }

  const std::string cmd = replace_all(
      replace_all(command_template_, "{lp}", lp_path.string()), "{sol}",
      sol_path.string());
  const int rc = std::system(cmd.c_str());
  if (rc != 0)
    throw SolveError("external solver command failed with code " +
                     std::to_string(rc) + ": " + cmd);

  std::ifstream in(sol_path);
  if (!in)
    throw SolveError("external solver produced no solution file " +
                     sol_path.string());

  std::map<std::string, std::uint32_t> name_to_index;
  for (std::uint32_t j = 0; j < model.num_vars(); ++j)
    name_to_index[model.var_name(VarId{j})] = j;

  Solution s;
  bool have_status = false;
  bool have_bound = false;
  double bound = 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.num_vars());

  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key))
      continue;
    if (key == "status") {
      std::string st;
      ls >> st;
      have_status = true;
      if (st == "optimal")
        s.status = SolveStatus::Optimal;
      else if (st == "infeasible")
        s.status = SolveStatus::Infeasible;
      else if (st == "feasible")
        s.status = SolveStatus::GapLimit;
      else
        s.status = SolveStatus::IterLimit;
    } else if (key == "objective") {
      double ignored;
      ls >> ignored; // recomputed locally from the assignment
    } else if (key == "bound") {
      ls >> bound;
      have_bound = true;
    } else {
      const auto it = name_to_index.find(key);
      if (it == name_to_index.end())
        throw SolveError("external solution names unknown variable '" + key +
                         "'");
      double v;
      if (!(ls >> v))
        throw SolveError("external solution has no value for '" + key + "'");
      x[it->second] = v;
    }
  }
  std::filesystem::remove(lp_path);
  std::filesystem::remove(sol_path);

  if (!have_status)
    throw SolveError("external solution file lacks a status line");
  if (s.status == SolveStatus::Infeasible)
    return s;

  // Validate rather than trust.
  const double viol = model.max_violation(x);
  if (viol > 10.0 * opts.feas_tol)
    throw SolveError("external solution violates constraints by " +
                     std::to_string(viol));
  for (std::uint32_t j = 0; j < model.num_vars(); ++j) {
    if (!model.is_binary(VarId{j}))
      continue;
    if (std::abs(x[j] - std::round(x[j])) > opts.int_tol)
      throw SolveError("external solution has fractional binary " +
                       model.var_name(VarId{j}));
  }

  s.assignment = x;
  double obj = model.objective_constant();
  for (const auto& t : model.objective_terms())
    obj += t.coef * x[t.var.index];
  s.objective = obj;
  s.bound = have_bound ? bound : obj;
  return s;
}

} // namespace nflreach
