#include "octrl/kernels.hpp"

#include "octrl/errors.hpp"

namespace octrl {

void KernelSpec::validate() const {
  require(family == KernelFamily::squared_exponential, "unknown kernel family");
  require(lengthscale > 0.0, "kernel lengthscale must be positive");
}

static void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() >= 1, "kernel inputs must have dimension >= 1");
  require(x.size() == y.size(), "kernel input dimension mismatch");
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(x, y);
  const double s2 = spec.lengthscale * spec.lengthscale;
  return std::exp(-(x - y).squaredNorm() / (2.0 * s2));
}

Eigen::VectorXd kernel_grad_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) {
  check_dims(x, y);
  const double s2 = spec.lengthscale * spec.lengthscale;
  return (-kernel_eval(spec, x, y) / s2) * (x - y);
}

double kernel_hess_trace_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
  check_dims(x, y);
  const double s2 = spec.lengthscale * spec.lengthscale;
  const double d2 = (x - y).squaredNorm();
  return (d2 / (s2 * s2) - static_cast<double>(x.size()) / s2) * kernel_eval(spec, x, y);
}

// |x_i - y_j|^2 for all pairs via one matrix product
static Eigen::MatrixXd sq_dists(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  Eigen::VectorXd xn = X.rowwise().squaredNorm();
  Eigen::VectorXd yn = Y.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * X * Y.transpose());
  d2.colwise() += xn;
  d2.rowwise() += yn.transpose();
  return d2.cwiseMax(0.0);
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  require(X.rows() >= 1 && Y.rows() >= 1, "gram: empty point set");
  require(X.cols() == Y.cols(), "gram: point dimension mismatch");
  const double s2 = spec.lengthscale * spec.lengthscale;
  return (sq_dists(X, Y) / (-2.0 * s2)).array().exp();
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd g = gram(spec, X, X);
  // rounding in the pairwise distances can perturb the diagonal; k(x,x) = 1 exactly
  g.diagonal().setOnes();
  return g;
}

Eigen::VectorXd gram_row(const KernelSpec& spec, const Eigen::VectorXd& x,
                         const Eigen::MatrixXd& X) {
  require(x.size() == X.cols(), "gram_row: point dimension mismatch");
  const double s2 = spec.lengthscale * spec.lengthscale;
  Eigen::VectorXd d2 =
      (X.rowwise() - x.transpose()).rowwise().squaredNorm();
  return (d2 / (-2.0 * s2)).array().exp();
}

}  // namespace octrl
