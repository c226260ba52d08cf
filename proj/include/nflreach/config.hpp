#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"

#include "nflreach/backreach.hpp"
#include "nflreach/nfl.hpp"

namespace nflreach {

// A fully validated run configuration: the system, the goal, and the reach
// parameters. Unknown keys anywhere in the file are rejected.
struct RunConfig {
  NeuralFeedbackLoop nfl;
  GoalSet goal;
  ReachConfig reach;
  std::int64_t coverage_samples = 10000;
  std::uint64_t coverage_seed = 0;
  nlohmann::json raw;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir);

// Shared strict-schema helper: every present key must be listed.
void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional);

} // namespace nflreach
