#pragma once

#include <Eigen/Dense>

namespace octrl {

enum class KernelFamily { squared_exponential };

struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double lengthscale = 1.0;

  void validate() const;
};

// k(x,y) = exp(-|x-y|^2 / (2 sigma^2))
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// gradient of k(x,y) in the first argument
Eigen::VectorXd kernel_grad_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y);

// trace of the Hessian of k(x,y) in the first argument
double kernel_hess_trace_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y);

// Gram matrix between two point sets (rows are points)
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

// symmetric Gram over one point set; unit diagonal exact
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X);

// row vector of kernel values k(x, X_i)
Eigen::VectorXd gram_row(const KernelSpec& spec, const Eigen::VectorXd& x,
                         const Eigen::MatrixXd& X);

}  // namespace octrl
