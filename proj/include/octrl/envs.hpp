#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>

#include "octrl/fenchel.hpp"
#include "octrl/rng.hpp"

namespace octrl {

enum class EnvKind { ou, nonlinear, pendulum };

// Built-in benchmark environments. The simulator state may differ from the
// observation fed to the learner: the pendulum integrates (theta, thetadot)
// internally and observes (cos theta, sin theta, thetadot).
class Env {
 public:
  static Env builtin(const std::string& name);

  EnvKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return act_dim_; }
  int sim_dim() const { return sim_dim_; }
  double epsilon() const { return epsilon_; }
  double dt_sim() const { return dt_sim_; }
  int horizon() const { return horizon_; }
  const ActionPenalty& penalty() const { return penalty_; }

  void set_epsilon(double eps);
  void set_dt_sim(double dt);
  void set_horizon(int steps);

  // drift f(x) in simulator coordinates
  Eigen::VectorXd drift(const Eigen::VectorXd& sim_state) const;
  // input map G(x), sim_dim x n_a
  Eigen::MatrixXd input_map(const Eigen::VectorXd& sim_state) const;
  // f(x) + G(x) a
  Eigen::VectorXd controlled_drift(const Eigen::VectorXd& sim_state,
                                   const Eigen::VectorXd& action) const;
  // state reward r_x at a simulator state
  double state_reward(const Eigen::VectorXd& sim_state) const;
  // observation map
  Eigen::VectorXd observe(const Eigen::VectorXd& sim_state) const;
  // time derivative of the observation under the controlled drift
  Eigen::VectorXd observed_drift(const Eigen::VectorXd& sim_state,
                                 const Eigen::VectorXd& action) const;

  // one Euler-Maruyama step of length h (the pendulum follows its source
  // environment: torque clipped, velocity updated before angle, bounded)
  Eigen::VectorXd em_step(const Eigen::VectorXd& sim_state, const Eigen::VectorXd& action,
                          double h, Rng& rng) const;

  // initial-state distribution for episodes
  Eigen::VectorXd sample_init(Rng& rng) const;

  // per-step return contribution: SDE benchmarks integrate (r_x - c_u) dt_sim,
  // the pendulum keeps its source environment's unscaled per-step reward
  double step_reward(const Eigen::VectorXd& sim_state, const Eigen::VectorXd& action) const;

  bool has_reference() const { return kind_ != EnvKind::pendulum; }
  // cost-convention reference value (s^2); unsupported for the pendulum
  double reference_value(double s) const;

  // default sampling regions for dataset generation, sim_dim x 2 / n_a x 2
  Eigen::MatrixXd default_state_box() const;
  Eigen::MatrixXd default_action_box() const;

 private:
  Env() = default;

  EnvKind kind_ = EnvKind::ou;
  std::string name_;
  int obs_dim_ = 1, act_dim_ = 1, sim_dim_ = 1;
  double epsilon_ = 0.01;
  double dt_sim_ = 0.01;
  int horizon_ = 200;
  ActionPenalty penalty_;
};

using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& obs)>;

struct RolloutStats {
  Eigen::VectorXd returns;  // one per episode
  double mean = 0.0;
  double stddev = 0.0;
};

// Episodes use derived seeds (rng_seed + episode index) so results do not
// depend on scheduling.
RolloutStats rollout(const Env& env, const PolicyFn& policy, int episodes,
                     std::uint64_t rng_seed);

// uniform random actions within the penalty bounds (or [-1,1] if unbounded)
RolloutStats rollout_random(const Env& env, int episodes, std::uint64_t rng_seed);

}  // namespace octrl
