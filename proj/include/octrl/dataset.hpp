#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace octrl {

class Env;

// Offline data: N rows of (state, action, state time-derivative), plus the
// state reward where known. Rewards are optional so a model can be fitted
// reward-free and re-targeted later.
struct Dataset {
  Eigen::MatrixXd states;   // N x n_s
  Eigen::MatrixXd actions;  // N x n_a
  Eigen::MatrixXd derivs;   // N x n_s
  Eigen::VectorXd rewards;  // length N, or empty

  Eigen::Index size() const { return states.rows(); }
  int state_dim() const { return static_cast<int>(states.cols()); }
  int action_dim() const { return static_cast<int>(actions.cols()); }
  bool has_rewards() const { return rewards.size() > 0; }

  void validate() const;
};

struct TransitionRecord {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  Eigen::VectorXd next_state;
  double dt = 0.0;
  bool has_reward = false;
  double reward = 0.0;
};

enum class DatasetFormat { jsonl, csv };

// (next_state - state) / dt
Eigen::VectorXd finite_difference(const TransitionRecord& record);

DatasetFormat format_from_path(const std::string& path);
Dataset load_dataset(const std::string& path, DatasetFormat format);
Dataset load_dataset(const std::string& path);  // format from extension
void save_dataset(const Dataset& data, const std::string& path, DatasetFormat format);
void save_dataset(const Dataset& data, const std::string& path);

// How derivatives are produced when generating synthetic data:
//   em_step     one Euler-Maruyama step of length h, then finite difference
//               (derivatives carry diffusion noise of magnitude sqrt(2 eps / h))
//   exact_drift noiseless f(x) + G(x) a
enum class DerivMode { em_step, exact_drift };

// States/actions drawn uniformly and independently from axis-aligned boxes
// (boxes are in the simulator's coordinates; rows of the output hold
// observations). One record consumes a fixed number of draws, so datasets
// with the same seed nest by prefix as N grows.
Dataset sample_iid(const Env& env, const Eigen::MatrixXd& state_box,
                   const Eigen::MatrixXd& action_box, Eigen::Index N, double h,
                   std::uint64_t rng_seed, DerivMode mode = DerivMode::em_step);

// Episodes under a uniform random policy from the environment's initial-state
// distribution; derivatives by finite differences over dt_sim.
Dataset sample_rollout(const Env& env, Eigen::Index N, std::uint64_t rng_seed);

}  // namespace octrl
