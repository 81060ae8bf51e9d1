#pragma once

#include <string>

#include "octrl/config.hpp"

namespace octrl {

struct CliPaths {
  std::string out_dir;
  std::string dataset_file;   // gen-data output / fit input override
  std::string model_file;     // fit output / solve input
  std::string solution_file;  // solve output / eval+rollout input
};

int cmd_gen_data(const ExperimentConfig& cfg, const CliPaths& paths);
int cmd_fit(const ExperimentConfig& cfg, const CliPaths& paths);
int cmd_solve(const ExperimentConfig& cfg, const CliPaths& paths);
int cmd_eval(const ExperimentConfig& cfg, const CliPaths& paths);
int cmd_rollout(const ExperimentConfig& cfg, const CliPaths& paths);
int cmd_rates(const ExperimentConfig& cfg, const CliPaths& paths);

// Parses arguments, dispatches, and maps errors to exit codes
// (0 ok, 1 I/O, 2 validation, 3 divergence).
int run_cli(int argc, char** argv);

}  // namespace octrl
