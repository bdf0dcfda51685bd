#pragma once

#include <Eigen/Core>

namespace catenc {

// Thin SVD m = u * diag(d) * v^T with r = min(rows, cols) columns kept.
// Sign convention: in each column of u the entry of largest magnitude is
// positive (v follows), which makes the factorization deterministic.
struct SvdFactors {
  Eigen::MatrixXd u;  // rows x r, orthonormal columns
  Eigen::VectorXd d;  // r, nonincreasing, nonnegative
  Eigen::MatrixXd v;  // cols x r, orthonormal columns
};

SvdFactors svd(const Eigen::MatrixXd& m);

// Moore-Penrose pseudo-inverse via SVD; singular values below tol * d_max
// are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol = 1e-10);

}  // namespace catenc
