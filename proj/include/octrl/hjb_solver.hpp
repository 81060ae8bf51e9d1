#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "octrl/fenchel.hpp"
#include "octrl/linalg.hpp"
#include "octrl/world_model.hpp"

namespace octrl {

struct DpConfig {
  double rho = 0.1;   // discount exponent, 1/s
  double dt = 0.01;   // pseudo-time step, s
  double tol = 1e-8;  // termination on coefficient change (2-norm)
  int k_max = 1000;

  void validate() const;
};

// Value-iteration output. Evaluation needs the model and the penalty, so the
// solution keeps both.
struct HjbSolution {
  std::shared_ptr<const WorldModel> model;
  ActionPenalty penalty;
  DpConfig config;
  Eigen::VectorXd v;                // coefficient vector
  Eigen::MatrixXd channel_weights;  // column k holds B_k v, for costate evaluation
  int iterations = 0;
  double final_change = 0.0;
  bool converged = false;
  std::vector<double> trace;  // coefficient change per iteration
};

// factored M = (I + dt (rho I - A)); applying it solves the system
LuFactor build_propagator(const WorldModel& model, const DpConfig& config);

// v' = M [v + dt (r + d)]
Eigen::VectorXd imex_step(const LuFactor& propagator, const Eigen::VectorXd& v,
                          const DpConfig& config, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& d);

HjbSolution solve(std::shared_ptr<const WorldModel> model, const ActionPenalty& penalty,
                  const DpConfig& config, const Eigen::VectorXd* v0 = nullptr);

double value_at(const HjbSolution& sol, const Eigen::VectorXd& x);
Eigen::VectorXd costate_at(const HjbSolution& sol, const Eigen::VectorXd& x);
Eigen::VectorXd policy_at(const HjbSolution& sol, const Eigen::VectorXd& x);

// batch value/policy over rows of X (one Gram product instead of many rows)
Eigen::VectorXd value_at(const HjbSolution& sol, const Eigen::MatrixXd& X);
Eigen::MatrixXd policy_at(const HjbSolution& sol, const Eigen::MatrixXd& X);

// solution artifact: embeds the model so it is self-contained
void save_solution(const HjbSolution& sol, const std::string& path);
HjbSolution load_solution(const std::string& path);

}  // namespace octrl
