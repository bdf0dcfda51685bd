#pragma once

#include <Eigen/Core>
#include <vector>

namespace catenc {

// Sparse PCA fit of a data matrix: minimize, over A (orthonormal columns)
// and B,
//   sum_i ||m_i - A B^T m_i||^2 + lambda * sum_j ||B_j||_2^2
//                               + sum_j lambda1_j * ||B_j||_1,
// where m_i are the rows of the input. Solved by alternating an elastic-net
// B-step (coordinate descent) with a Procrustes A-step.
struct SpcaFactors {
  Eigen::MatrixXd a;       // p x k, a^T a = I
  Eigen::MatrixXd b;       // p x k sparse loadings
  double lambda = 0.0;
  Eigen::VectorXd lambda1;              // per-component L1 weights
  std::vector<double> objective_trace;  // one entry per outer iteration
  bool converged = false;
};

SpcaFactors sparse_pca(const Eigen::MatrixXd& m, int k, double lambda,
                       const Eigen::VectorXd& lambda1, int max_iter = 200,
                       double rel_tol = 1e-6);

// Scalar lambda1 broadcast to every component.
SpcaFactors sparse_pca(const Eigen::MatrixXd& m, int k, double lambda,
                       double lambda1, int max_iter = 200,
                       double rel_tol = 1e-6);

}  // namespace catenc
