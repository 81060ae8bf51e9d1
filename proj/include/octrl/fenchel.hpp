#pragma once

#include <Eigen/Dense>

namespace octrl {

class SpdFactor;

// Diagonal quadratic action cost c_u(u) = sum_k w_k u_k^2 with optional
// symmetric box bounds |u_k| <= u_max_k. Strong convexity (w_k > 0) gives the
// maximizer and conjugate in closed form.
struct ActionPenalty {
  Eigen::VectorXd weights;
  Eigen::VectorXd u_max;  // empty => unbounded

  bool bounded() const { return u_max.size() > 0; }
  int dim() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

// u*(lam): componentwise clip(lam_k / (2 w_k), +-u_max_k)
Eigen::VectorXd argmax_action(const ActionPenalty& penalty, const Eigen::VectorXd& lam);

double action_cost(const ActionPenalty& penalty, const Eigen::VectorXd& u);

// D_u(lam) = <u*(lam), lam> - c_u(u*(lam))
double conjugate(const ActionPenalty& penalty, const Eigen::VectorXd& lam);

// rowwise conjugate over a table of costates (one row per training point)
Eigen::VectorXd conjugate_rowwise(const ActionPenalty& penalty, const Eigen::MatrixXd& costates);

// conjugate_rowwise followed by one solve against the fitted Gram factorization
Eigen::VectorXd conjugate_vector(const ActionPenalty& penalty, const Eigen::MatrixXd& costates,
                                 const SpdFactor& factor);

}  // namespace octrl
