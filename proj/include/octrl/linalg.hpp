#pragma once

#include <Eigen/Dense>

namespace octrl {

// Cholesky factorization of a symmetric positive-definite matrix, backed by
// LAPACK. The input buffer is consumed (factored in place) to keep peak memory
// at one N x N copy.
class SpdFactor {
 public:
  SpdFactor() = default;

  // factors m in place; throws on failure (matrix not numerically SPD)
  void compute(Eigen::MatrixXd&& m);

  bool ready() const { return fac_.size() > 0; }
  Eigen::Index size() const { return fac_.rows(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  void solve_in_place(Eigen::MatrixXd& rhs) const;

  // reciprocal 1-norm condition estimate (needs the 1-norm of the original matrix)
  double rcond(double original_one_norm) const;

 private:
  Eigen::MatrixXd fac_;
};

// LU factorization with partial pivoting, LAPACK-backed, input consumed.
class LuFactor {
 public:
  LuFactor() = default;

  void compute(Eigen::MatrixXd&& m);

  bool ready() const { return fac_.size() > 0; }
  Eigen::Index size() const { return fac_.rows(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  Eigen::MatrixXd fac_;
  Eigen::VectorXi piv_;
};

}  // namespace octrl
