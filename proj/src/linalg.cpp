#include "octrl/linalg.hpp"

#include <lapacke.h>

#include <string>
#include <utility>

#include "octrl/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace octrl {

static_assert(sizeof(lapack_int) == sizeof(int), "LP64 LAPACK expected");

// BLAS threading is pinned so numeric output never depends on the host's
// core count; experiment-level parallelism happens above this layer.
namespace {
struct BlasThreadPin {
  BlasThreadPin() { openblas_set_num_threads(1); }
} blas_thread_pin;
}  // namespace

void SpdFactor::compute(Eigen::MatrixXd&& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, "SpdFactor: matrix must be square");
  fac_ = std::move(m);
  const lapack_int n = static_cast<lapack_int>(fac_.rows());
  lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, fac_.data(), n);
  if (info != 0) {
    fac_.resize(0, 0);
    throw_validation("Cholesky factorization failed (matrix not positive definite, info=" +
                     std::to_string(info) + ")");
  }
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& rhs) const {
  require(ready(), "SpdFactor: factorization not computed");
  require(rhs.size() == size(), "SpdFactor: rhs size mismatch");
  Eigen::VectorXd x = rhs;
  const lapack_int n = static_cast<lapack_int>(size());
  lapack_int info = LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, fac_.data(), n, x.data(), n);
  require(info == 0, "SpdFactor: solve failed");
  return x;
}

void SpdFactor::solve_in_place(Eigen::MatrixXd& rhs) const {
  require(ready(), "SpdFactor: factorization not computed");
  require(rhs.rows() == size(), "SpdFactor: rhs size mismatch");
  const lapack_int n = static_cast<lapack_int>(size());
  lapack_int info = LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, static_cast<lapack_int>(rhs.cols()),
                                   fac_.data(), n, rhs.data(), n);
  require(info == 0, "SpdFactor: solve failed");
}

double SpdFactor::rcond(double original_one_norm) const {
  require(ready(), "SpdFactor: factorization not computed");
  const lapack_int n = static_cast<lapack_int>(size());
  double rc = 0.0;
  lapack_int info =
      LAPACKE_dpocon(LAPACK_COL_MAJOR, 'L', n, fac_.data(), n, original_one_norm, &rc);
  require(info == 0, "SpdFactor: condition estimate failed");
  return rc;
}

void LuFactor::compute(Eigen::MatrixXd&& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, "LuFactor: matrix must be square");
  fac_ = std::move(m);
  const lapack_int n = static_cast<lapack_int>(fac_.rows());
  piv_.resize(n);
  lapack_int info = LAPACKE_dgetrf(LAPACK_COL_MAJOR, n, n, fac_.data(), n, piv_.data());
  if (info != 0) {
    fac_.resize(0, 0);
    throw_validation("LU factorization failed (singular system, info=" + std::to_string(info) +
                     ")");
  }
}

Eigen::VectorXd LuFactor::solve(const Eigen::VectorXd& rhs) const {
  require(ready(), "LuFactor: factorization not computed");
  require(rhs.size() == size(), "LuFactor: rhs size mismatch");
  Eigen::VectorXd x = rhs;
  const lapack_int n = static_cast<lapack_int>(size());
  lapack_int info =
      LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'N', n, 1, fac_.data(), n, piv_.data(), x.data(), n);
  require(info == 0, "LuFactor: solve failed");
  return x;
}

}  // namespace octrl
