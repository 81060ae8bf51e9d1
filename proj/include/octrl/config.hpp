#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "octrl/fenchel.hpp"

namespace octrl {

struct EnvOverrides {
  std::string name = "ou";
  std::optional<double> epsilon;
  std::optional<double> dt_sim;
  std::optional<int> horizon;
};

struct GenerateSpec {
  std::int64_t N = 200;
  std::string mode = "em";  // em | exact | rollout
  double h = 1e-3;
  std::vector<std::array<double, 2>> state_box;   // empty: environment default
  std::vector<std::array<double, 2>> action_box;  // empty: environment default
  std::optional<std::uint64_t> seed;              // unset: global seed
};

struct DatasetSource {
  std::optional<std::string> file;
  std::optional<GenerateSpec> generate;
};

struct EvalGridSpec {
  double lo = -3.0;
  double hi = 3.0;
  int points = 1000;
  double thetadot = 0.0;  // pendulum: fixed velocity for the theta sweep
};

struct RatesSpec {
  std::vector<std::int64_t> N_list = {25, 50, 100, 200, 400};
  int seeds = 8;
  std::optional<std::uint64_t> seed_base;  // unset: global seed
  std::vector<double> quantiles = {0.25, 0.5, 0.75};
};

struct RolloutSpec {
  int episodes = 50;
  std::optional<std::uint64_t> seed;  // unset: global seed
  std::string policy = "learned";     // learned | random
};

struct ExperimentConfig {
  EnvOverrides env;
  double sigma = 1.0;
  double gamma = 1e-8;
  double epsilon = 0.01;  // diffusion coefficient used in the fit
  double rho = 0.0;
  double dt = 0.01;
  double tol = 1e-8;
  int k_max = 1000;
  std::optional<ActionPenalty> penalty;  // unset: environment default
  DatasetSource dataset;
  EvalGridSpec eval_grid;
  RatesSpec rates;
  RolloutSpec rollout;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

// benchmark presets (hyperparameters, data source, penalties per environment)
ExperimentConfig default_config(const std::string& env_name);

}  // namespace octrl
