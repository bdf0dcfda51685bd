#include "catenc/linalg.h"

#include <Eigen/Dense>

#include "catenc/errors.h"

namespace catenc {

SvdFactors svd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) throw NumericError("svd of an empty matrix");
  if (!m.allFinite()) throw NumericError("svd input contains non-finite values");
  Eigen::JacobiSVD<Eigen::MatrixXd> s(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors f;
  f.u = s.matrixU();
  f.d = s.singularValues();
  f.v = s.matrixV();
  // Fix the sign of each singular pair so factorizations are reproducible
  // across inputs that differ only by row order: the entry of u with the
  // largest magnitude is made positive (ties broken by lowest index).
  for (int j = 0; j < f.u.cols(); ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < f.u.rows(); ++i) {
      const double a = std::abs(f.u(i, j));
      if (a > best + 1e-14) {
        best = a;
        arg = i;
      }
    }
    if (f.u(arg, j) < 0) {
      f.u.col(j) = -f.u.col(j);
      f.v.col(j) = -f.v.col(j);
    }
  }
  return f;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol) {
  const SvdFactors f = svd(m);
  const double cutoff =
      tol * std::max(m.rows(), m.cols()) * (f.d.size() > 0 ? f.d(0) : 0.0);
  Eigen::VectorXd dinv = Eigen::VectorXd::Zero(f.d.size());
  for (int i = 0; i < f.d.size(); ++i)
    if (f.d(i) > cutoff) dinv(i) = 1.0 / f.d(i);
  return f.v * dinv.asDiagonal() * f.u.transpose();
}

}  // namespace catenc
