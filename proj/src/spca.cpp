#include "catenc/spca.h"

#include <cmath>

#include <Eigen/Dense>

#include "catenc/errors.h"
#include "catenc/linalg.h"

namespace catenc {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Elastic net of the response m*a on the columns of m, written entirely in
// terms of the Gram matrix g = m^T m:
//   minimize ||m a - m b||^2 + lambda ||b||^2 + lambda1 ||b||_1.
// Coordinate descent on b; `b` holds the warm start and receives the result.
void elastic_net_cd(const Eigen::MatrixXd& g, const Eigen::VectorXd& a,
                    double lambda, double lambda1, Eigen::VectorXd& b) {
  constexpr int kMaxSweeps = 2000;
  // The outer objective trace is required to be monotone, so the inner solve
  // runs to a much tighter tolerance than the outer loop.
  constexpr double kTol = 1e-12;
  const int p = static_cast<int>(g.rows());
  const Eigen::VectorXd ga = g * a;
  Eigen::VectorXd gb = g * b;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    for (int t = 0; t < p; ++t) {
      const double old = b(t);
      // Correlation of column t with the residual, with coordinate t removed.
      const double rho = ga(t) - gb(t) + g(t, t) * old;
      const double denom = g(t, t) + lambda;
      const double next = denom > 0.0 ? soft_threshold(rho, 0.5 * lambda1) / denom
                                      : 0.0;
      if (next != old) {
        gb += g.col(t) * (next - old);
        b(t) = next;
        max_delta = std::max(max_delta, std::abs(next - old));
      }
    }
    if (max_delta < kTol) return;
  }
}

}  // namespace

SpcaFactors sparse_pca(const Eigen::MatrixXd& m, int k, double lambda,
                       const Eigen::VectorXd& lambda1, int max_iter,
                       double rel_tol) {
  const int p = static_cast<int>(m.cols());
  if (k < 1 || k > p)
    throw ConfigError("sparse_pca: k must be between 1 and the column count");
  if (lambda < 0.0) throw ConfigError("sparse_pca: lambda must be >= 0");
  if (lambda1.size() != k)
    throw ConfigError("sparse_pca: lambda1 must have one entry per component");
  if ((lambda1.array() < 0.0).any())
    throw ConfigError("sparse_pca: lambda1 entries must be >= 0");
  if (!m.allFinite())
    throw NumericError("sparse_pca: input contains non-finite values");

  const Eigen::MatrixXd gram = m.transpose() * m;
  const double gram_trace = gram.trace();

  SpcaFactors f;
  f.lambda = lambda;
  f.lambda1 = lambda1;
  // Start from the ordinary PCA loadings so that with zero penalties the
  // alternation stays in (and polishes) the leading principal subspace.
  const SvdFactors init = svd(m);
  f.a = init.v.leftCols(k);
  f.b = f.a;

  auto objective = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    // ||m - m b a^T||_F^2 = tr(g) - 2 tr(b^T g a) + tr(b^T g b) when a^T a = I.
    double val = gram_trace - 2.0 * (b.transpose() * gram * a).trace() +
                 (b.transpose() * gram * b).trace();
    val += lambda * b.squaredNorm();
    for (int j = 0; j < k; ++j) val += lambda1(j) * b.col(j).lpNorm<1>();
    return val;
  };

  double prev = objective(f.a, f.b);
  f.objective_trace.push_back(prev);
  for (int iter = 0; iter < max_iter; ++iter) {
    // B-step: one elastic net per component, warm-started at the current B.
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd bj = f.b.col(j);
      elastic_net_cd(gram, f.a.col(j), lambda, lambda1(j), bj);
      f.b.col(j) = bj;
    }
    // A-step: Procrustes rotation, the exact minimizer over orthonormal A.
    const Eigen::MatrixXd gb = gram * f.b;
    if (gb.norm() > 0.0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> s(
          gb, Eigen::ComputeThinU | Eigen::ComputeThinV);
      f.a = s.matrixU() * s.matrixV().transpose();
    }
    const double cur = objective(f.a, f.b);
    f.objective_trace.push_back(cur);
    const double denom = std::max(1.0, std::abs(prev));
    if (std::abs(prev - cur) / denom < rel_tol) {
      f.converged = true;
      break;
    }
    prev = cur;
  }
  return f;
}

SpcaFactors sparse_pca(const Eigen::MatrixXd& m, int k, double lambda,
                       double lambda1, int max_iter, double rel_tol) {
  return sparse_pca(m, k, lambda,
                    Eigen::VectorXd::Constant(std::max(k, 1), lambda1),
                    max_iter, rel_tol);
}

}  // namespace catenc
