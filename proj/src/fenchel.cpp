#include "octrl/fenchel.hpp"

#include <cmath>

#include "octrl/errors.hpp"
#include "octrl/linalg.hpp"

namespace octrl {

void ActionPenalty::validate() const {
  require(weights.size() >= 1, "penalty needs at least one action dimension");
  require((weights.array() > 0.0).all(), "penalty weights must be positive");
  if (bounded()) {
    require(u_max.size() == weights.size(), "penalty bounds dimension mismatch");
    require((u_max.array() > 0.0).all(), "penalty bounds must be positive");
  }
}

Eigen::VectorXd argmax_action(const ActionPenalty& penalty, const Eigen::VectorXd& lam) {
  require(lam.size() == penalty.weights.size(), "costate dimension mismatch");
  Eigen::VectorXd u = lam.array() / (2.0 * penalty.weights.array());
  if (penalty.bounded()) u = u.cwiseMin(penalty.u_max).cwiseMax(-penalty.u_max);
  return u;
}

double action_cost(const ActionPenalty& penalty, const Eigen::VectorXd& u) {
  require(u.size() == penalty.weights.size(), "action dimension mismatch");
  return (penalty.weights.array() * u.array().square()).sum();
}

double conjugate(const ActionPenalty& penalty, const Eigen::VectorXd& lam) {
  require(lam.size() == penalty.weights.size(), "costate dimension mismatch");
  double total = 0.0;
  for (int k = 0; k < lam.size(); ++k) {
    const double w = penalty.weights[k];
    const double unclipped = lam[k] / (2.0 * w);
    if (penalty.bounded() && std::abs(unclipped) > penalty.u_max[k]) {
      const double m = penalty.u_max[k];
      total += m * std::abs(lam[k]) - w * m * m;
    } else {
      total += lam[k] * lam[k] / (4.0 * w);
    }
  }
  return total;
}

Eigen::VectorXd conjugate_rowwise(const ActionPenalty& penalty, const Eigen::MatrixXd& costates) {
  Eigen::VectorXd out(costates.rows());
  for (Eigen::Index i = 0; i < costates.rows(); ++i)
    out[i] = conjugate(penalty, costates.row(i).transpose());
  return out;
}

Eigen::VectorXd conjugate_vector(const ActionPenalty& penalty, const Eigen::MatrixXd& costates,
                                 const SpdFactor& factor) {
  require(factor.size() == costates.rows(), "factorization size mismatch");
  return factor.solve(conjugate_rowwise(penalty, costates));
}

}  // namespace octrl
