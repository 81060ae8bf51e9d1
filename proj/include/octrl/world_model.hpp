#pragma once

#include <Eigen/Dense>
#include <string>

#include "octrl/dataset.hpp"
#include "octrl/kernels.hpp"
#include "octrl/linalg.hpp"

namespace octrl {

// Regularized Gram matrix over state-action pairs:
//   (K_gamma)_ij = k(x_i, x_j) (1 + <a_i, a_j>) + N gamma [i == j]
Eigen::MatrixXd assemble_gram(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                              const KernelSpec& kernel, double gamma);

// Target matrix pairing sampled derivatives with kernel derivatives:
//   (K_d)_ij = <deriv_i, grad_x k(x_i, x_j)> + epsilon tr hess_x k(x_i, x_j)
Eigen::MatrixXd assemble_target(const Eigen::MatrixXd& states, const Eigen::MatrixXd& derivs,
                                const KernelSpec& kernel, double epsilon);

// Fitted generator world model. The dynamics matrix solves
// K_gamma A = K_d; per-action-dimension operators are row scalings
// B_k = diag(U e_k) A and are derived on demand rather than stored.
class WorldModel {
 public:
  static WorldModel fit(const Dataset& data, const KernelSpec& kernel, double gamma,
                        double epsilon);

  // Solves K_gamma r = y_r and stores r. May be called repeatedly with new
  // rewards; nothing else on the model changes.
  void set_reward(const Eigen::VectorXd& y_r);

  Eigen::Index size() const { return states_.rows(); }
  int state_dim() const { return static_cast<int>(states_.cols()); }
  int action_dim() const { return static_cast<int>(actions_.cols()); }
  const KernelSpec& kernel() const { return kernel_; }
  double gamma() const { return gamma_; }
  double epsilon() const { return epsilon_; }
  const Eigen::MatrixXd& train_states() const { return states_; }
  const Eigen::MatrixXd& train_actions() const { return actions_; }
  const Eigen::MatrixXd& dynamics() const { return dynamics_; }
  const Eigen::MatrixXd& gram_states() const { return gram_states_; }
  const SpdFactor& gram_factor() const { return factor_; }
  bool has_reward() const { return reward_coef_.size() > 0; }
  const Eigen::VectorXd& reward_coef() const;
  double rcond() const { return rcond_; }

  // B_k v = U_{.k} .* (A v)
  Eigen::VectorXd channel_apply(int k, const Eigen::VectorXd& v) const;
  // materialized B_k (test/diagnostic use; O(N^2) storage)
  Eigen::MatrixXd action_channel(int k) const;

  // K_gamma x without the assembled matrix (the factor overwrote it)
  Eigen::MatrixXd apply_gram(const Eigen::MatrixXd& x) const;

  // artifact I/O; binary by default, JSON when the path ends in .json
  void save(const std::string& path) const;
  static WorldModel load(const std::string& path);

  // binary stream form, embeddable in other artifacts
  void save_stream(std::ostream& out) const;
  static WorldModel load_stream(std::istream& in);

 private:
  WorldModel() = default;
  void finalize_from_loaded();  // rebuild K_S and the factorization

  KernelSpec kernel_;
  double gamma_ = 0.0;
  double epsilon_ = 0.0;
  Eigen::MatrixXd states_, actions_;
  Eigen::MatrixXd gram_states_;  // K_S
  SpdFactor factor_;             // Cholesky of K_gamma
  Eigen::MatrixXd dynamics_;     // A
  Eigen::VectorXd reward_coef_;  // r, empty until set_reward
  double rcond_ = 0.0;
};

}  // namespace octrl
