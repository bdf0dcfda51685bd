#pragma once

#include <Eigen/Core>
#include <vector>

namespace catenc {

// Multinomial logit P(G=g|x) = exp(z_g) / sum_g' exp(z_g') with
// z_g = theta_g0 + x^T theta_g,1:p. The last category is the reference:
// its coefficient row is identically zero.
struct MnlModel {
  Eigen::MatrixXd theta;  // M x (p+1); column 0 is the intercept
  double reg = 0.0;       // ridge weight on non-intercept entries
  bool converged = false;
  double grad_norm = 0.0;  // final inf-norm of the penalized score
  int iterations = 0;
};

// Maximizes sum_i log P(g_i|x_i) - (reg/2) * sum of squared non-intercept
// coefficients. Covariates are z-scored internally and the coefficients
// mapped back, so `theta` is expressed on the original scale. Stops when the
// inf-norm of the gradient (original scale) drops to `tol` or after
// `max_iter` iterations; the latter leaves converged == false.
MnlModel fit_mnl(const Eigen::MatrixXd& x, const std::vector<int>& g,
                 double reg = 1e-8, int max_iter = 500, double tol = 1e-6);

// Penalized log-likelihood and its gradient at an arbitrary theta (reference
// row ignored and treated as zero). Exposed for diagnostics and tests.
double mnl_log_likelihood(const Eigen::MatrixXd& theta,
                          const Eigen::MatrixXd& x, const std::vector<int>& g,
                          double reg);
Eigen::MatrixXd mnl_gradient(const Eigen::MatrixXd& theta,
                             const Eigen::MatrixXd& x,
                             const std::vector<int>& g, double reg);

// n x M matrix of class probabilities.
Eigen::MatrixXd mnl_probabilities(const Eigen::MatrixXd& theta,
                                  const Eigen::MatrixXd& x);

}  // namespace catenc
