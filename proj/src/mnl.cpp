#include "catenc/mnl.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Dense>

#include "catenc/errors.h"

namespace catenc {

namespace {

void validate(const Eigen::MatrixXd& x, const std::vector<int>& g, int* m_out) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw DataError("mnl: no rows");
  if (static_cast<int>(g.size()) != n)
    throw DataError("mnl: label count does not match row count");
  if (!x.allFinite()) throw DataError("mnl: covariates contain non-finite values");
  int m = 0;
  for (int gi : g) {
    if (gi < 0) throw DataError("mnl: negative class label");
    m = std::max(m, gi + 1);
  }
  if (m < 2) throw DataError("mnl: need at least two classes");
  std::vector<int> counts(m, 0);
  for (int gi : g) ++counts[gi];
  for (int a = 0; a < m; ++a)
    if (counts[a] == 0)
      throw DataError("mnl: class " + std::to_string(a) + " has no rows");
  *m_out = m;
}

// Objective/gradient evaluator for the z-scored problem. The free parameter
// block is theta_s, laid out (p+1) x (M-1) so that flattening it column-major
// keeps each class contiguous, which is what the blocked Newton Hessian needs.
struct MnlProblem {
  Eigen::MatrixXd aug;       // n x (p+1): leading ones column, z-scored x
  Eigen::VectorXd mean;      // p, column means of x
  Eigen::VectorXd scale;     // p, column sds (1 for constant columns)
  Eigen::VectorXd ridge;     // p+1 per-coordinate weights in scaled coords
  const std::vector<int>* g = nullptr;
  int m = 0;

  // Scratch reused across evaluations.
  Eigen::MatrixXd z;         // n x (M-1)
  Eigen::MatrixXd resid;     // n x (M-1), one-hot minus probabilities
  Eigen::VectorXd zshift;    // n, per-row softmax shift
  Eigen::VectorXd denom;     // n, shifted partition sums

  int dim() const { return static_cast<int>(aug.cols()) * (m - 1); }

  // Negative penalized log-likelihood and its gradient in scaled coordinates.
  double eval(const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
    const int n = static_cast<int>(aug.rows());
    const int q = static_cast<int>(aug.cols());
    const Eigen::Map<const Eigen::MatrixXd> theta(w.data(), q, m - 1);
    z.noalias() = aug * theta;
    // The reference class contributes a fixed zero logit, so the stabilizing
    // shift is at least zero. Whole-matrix exp/log keep this vectorized.
    zshift = z.rowwise().maxCoeff().cwiseMax(0.0);
    resid = (z.colwise() - zshift).array().exp();
    denom = resid.rowwise().sum();
    denom.array() += (-zshift.array()).exp();
    double ll = -zshift.sum() - denom.array().log().sum();
    resid.array().colwise() *= -denom.array().inverse();
    for (int i = 0; i < n; ++i) {
      const int gi = (*g)[i];
      if (gi < m - 1) {
        ll += z(i, gi);
        resid(i, gi) += 1.0;
      }
    }
    Eigen::Map<Eigen::MatrixXd> gmat(grad.data(), q, m - 1);
    gmat.noalias() = -(aug.transpose() * resid);
    gmat += ridge.asDiagonal() * theta;
    double pen = 0.0;
    for (int a = 0; a < m - 1; ++a)
      pen += (ridge.array() * theta.col(a).array().square()).sum();
    return -ll + 0.5 * pen;
  }

  // Inf-norm of the gradient re-expressed on the original covariate scale.
  // With t_j = (x_j - mean_j) / scale_j the chain rule gives
  //   d/d theta_0 = d/d t_0,   d/d theta_j = mean_j * d/d t_0 + scale_j * d/d t_j.
  double original_grad_inf(const Eigen::VectorXd& grad) const {
    const int q = static_cast<int>(aug.cols());
    const Eigen::Map<const Eigen::MatrixXd> gmat(grad.data(), q, m - 1);
    double inf = 0.0;
    for (int a = 0; a < m - 1; ++a) {
      inf = std::max(inf, std::abs(gmat(0, a)));
      for (int j = 1; j < q; ++j)
        inf = std::max(inf, std::abs(mean(j - 1) * gmat(0, a) +
                                     scale(j - 1) * gmat(j, a)));
    }
    return inf;
  }
};

MnlProblem make_problem(const Eigen::MatrixXd& x, const std::vector<int>& g,
                        int m, double reg) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  MnlProblem pr;
  pr.g = &g;
  pr.m = m;
  pr.mean = x.colwise().mean();
  pr.scale.resize(p);
  for (int j = 0; j < p; ++j) {
    const double var = (x.col(j).array() - pr.mean(j)).square().sum() / n;
    pr.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  pr.aug.resize(n, p + 1);
  pr.aug.col(0).setOnes();
  for (int j = 0; j < p; ++j)
    pr.aug.col(j + 1) = (x.col(j).array() - pr.mean(j)) / pr.scale(j);
  // Ridge stated on original-scale slopes becomes reg / scale^2 after the
  // change of variables; intercepts stay unpenalized.
  pr.ridge.resize(p + 1);
  pr.ridge(0) = 0.0;
  for (int j = 0; j < p; ++j) pr.ridge(j + 1) = reg / (pr.scale(j) * pr.scale(j));
  pr.z.resize(n, m - 1);
  pr.resid.resize(n, m - 1);
  pr.zshift.resize(n);
  pr.denom.resize(n);
  return pr;
}

Eigen::VectorXd initial_point(const MnlProblem& pr, const std::vector<int>& g) {
  const int q = static_cast<int>(pr.aug.cols());
  std::vector<int> counts(pr.m, 0);
  for (int gi : g) ++counts[gi];
  Eigen::VectorXd w = Eigen::VectorXd::Zero(pr.dim());
  Eigen::Map<Eigen::MatrixXd> theta(w.data(), q, pr.m - 1);
  // Intercept-only maximum likelihood: log odds against the reference class.
  for (int a = 0; a < pr.m - 1; ++a)
    theta(0, a) = std::log(static_cast<double>(counts[a]) / counts[pr.m - 1]);
  return w;
}

// Full damped Newton with the exact blocked Hessian. Only used when the free
// parameter count is small enough that forming it is cheap.
void solve_newton(MnlProblem& pr, Eigen::VectorXd& w, double tol, int max_iter,
                  bool* converged, double* grad_norm, int* iters) {
  const int q = static_cast<int>(pr.aug.cols());
  const int n = static_cast<int>(pr.aug.rows());
  const int d = pr.dim();
  Eigen::VectorXd grad(d), wtry(d), gtry(d);
  double f = pr.eval(w, grad);
  Eigen::MatrixXd stacked(n, d);   // class a block: diag(p_a) * aug
  Eigen::MatrixXd hess(d, d);
  for (int it = 0; it < max_iter; ++it) {
    *grad_norm = pr.original_grad_inf(grad);
    if (*grad_norm <= tol) {
      *converged = true;
      return;
    }
    *iters = it + 1;
    // eval leaves resid = onehot - prob; recover the probabilities.
    for (int a = 0; a < pr.m - 1; ++a) {
      Eigen::VectorXd pa = -pr.resid.col(a);
      for (int i = 0; i < n; ++i)
        if ((*pr.g)[i] == a) pa(i) += 1.0;
      stacked.middleCols(a * q, q) = pa.asDiagonal() * pr.aug;
    }
    hess.noalias() = -(stacked.transpose() * stacked);
    for (int a = 0; a < pr.m - 1; ++a) {
      hess.block(a * q, a * q, q, q).noalias() +=
          pr.aug.transpose() * stacked.middleCols(a * q, q);
      hess.block(a * q, a * q, q, q) += pr.ridge.asDiagonal();
    }
    const Eigen::VectorXd step = hess.ldlt().solve(-grad);
    const double slope = grad.dot(step);
    // Once the predicted decrease -slope/2 is near the floating-point
    // resolution of f (which grows with n), a sufficient-decrease test can
    // no longer measure progress. The Newton decrement is then ~1e-4, deep
    // inside the quadratic phase, so take the unit step without a search.
    if (-slope <= 1e-8 * (1.0 + std::abs(f))) {
      const double gprev = *grad_norm;
      w += step;
      f = pr.eval(w, grad);
      *grad_norm = pr.original_grad_inf(grad);
      if (*grad_norm > 0.5 * gprev) break;  // at the fp floor; stop honestly
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      wtry = w + t * step;
      const double ftry = pr.eval(wtry, gtry);
      if (ftry <= f + 1e-4 * t * slope) {
        w = wtry;
        f = ftry;
        grad = gtry;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // stalled; report the last iterate honestly
  }
  *grad_norm = pr.original_grad_inf(grad);
  *converged = *grad_norm <= tol;
}

// L-BFGS with strong Wolfe line search for the large-parameter regime. The
// initial inverse Hessian is the class-diagonal Fisher block
//   B_a = aug^T diag(p_a (1 - p_a)) aug + ridge,
// refreshed every kPrecondRefresh accepted steps: the cross-class blocks it
// drops are an order smaller when no class dominates, and without it the
// class-count imbalance stretches the spectrum enough to cost hundreds of
// iterations at M ~ 100.
void solve_lbfgs(MnlProblem& pr, Eigen::VectorXd& w, double tol, int max_iter,
                 bool* converged, double* grad_norm, int* iters) {
  constexpr int kMemory = 20;
  constexpr double kC1 = 1e-4;
  constexpr double kC2 = 0.9;
  constexpr int kPrecondRefresh = 10;
  const int d = pr.dim();
  const int q_cols = static_cast<int>(pr.aug.cols());
  const int n = static_cast<int>(pr.aug.rows());
  Eigen::VectorXd grad(d), gtry(d), wtry(d), dir(d), q(d);
  double f = pr.eval(w, grad);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  // eval() must have run at the current w so pr.resid holds onehot - prob.
  std::vector<Eigen::LLT<Eigen::MatrixXd>> blocks(pr.m - 1);
  Eigen::MatrixXd scaled(n, q_cols), block(q_cols, q_cols);
  Eigen::VectorXd weight(n);
  auto build_precond = [&]() {
    for (int a = 0; a < pr.m - 1; ++a) {
      for (int i = 0; i < n; ++i) {
        const double pa = ((*pr.g)[i] == a ? 1.0 : 0.0) - pr.resid(i, a);
        weight(i) = std::sqrt(std::max(0.0, pa * (1.0 - pa)));
      }
      scaled = weight.asDiagonal() * pr.aug;
      block.noalias() = scaled.transpose() * scaled;
      block += pr.ridge.asDiagonal();
      // Keeps the factorization alive for classes whose fitted mass is
      // vanishing (empty intercept ridge, near-zero weights).
      block.diagonal().array() += 1e-8 * (1.0 + block.diagonal().maxCoeff());
      blocks[a].compute(block);
    }
  };
  auto apply_precond = [&](Eigen::VectorXd& v) {
    Eigen::Map<Eigen::MatrixXd> vm(v.data(), q_cols, pr.m - 1);
    for (int a = 0; a < pr.m - 1; ++a)
      vm.col(a) = blocks[a].solve(vm.col(a));
  };
  build_precond();
  int since_refresh = 0;

  auto wolfe = [&](const Eigen::VectorXd& direction, double f0, double slope0,
                   double* f_out) -> double {
    auto phi = [&](double t, double* dphi) {
      wtry = w + t * direction;
      const double val = pr.eval(wtry, gtry);
      *dphi = gtry.dot(direction);
      return val;
    };
    auto zoom = [&](double lo, double hi, double flo) -> double {
      for (int it = 0; it < 30; ++it) {
        const double t = 0.5 * (lo + hi);
        double dphi;
        const double ft = phi(t, &dphi);
        if (ft > f0 + kC1 * t * slope0 || ft >= flo) {
          hi = t;
        } else {
          if (std::abs(dphi) <= -kC2 * slope0) {
            *f_out = ft;
            return t;
          }
          if (dphi * (hi - lo) >= 0.0) hi = lo;
          lo = t;
          flo = ft;
        }
      }
      double dphi;
      *f_out = phi(lo, &dphi);
      return lo;
    };
    double t_prev = 0.0, f_prev = f0, t = 1.0;
    for (int it = 0; it < 20; ++it) {
      double dphi;
      const double ft = phi(t, &dphi);
      if (ft > f0 + kC1 * t * slope0 || (it > 0 && ft >= f_prev))
        return zoom(t_prev, t, f_prev);
      if (std::abs(dphi) <= -kC2 * slope0) {
        *f_out = ft;
        return t;
      }
      if (dphi >= 0.0) return zoom(t, t_prev, ft);
      t_prev = t;
      f_prev = ft;
      t = std::min(2.0 * t, 1e4);
    }
    // Expansion ran out; re-evaluate so gtry matches the returned step.
    double dphi;
    *f_out = phi(t_prev, &dphi);
    return t_prev;
  };

  for (int it = 0; it < max_iter; ++it) {
    *grad_norm = pr.original_grad_inf(grad);
    if (*grad_norm <= tol) {
      *converged = true;
      return;
    }
    *iters = it + 1;
    if (since_refresh >= kPrecondRefresh) {
      build_precond();
      since_refresh = 0;
    }
    // Two-loop recursion around the block preconditioner.
    q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    apply_precond(q);
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    dir = -q;
    double slope = grad.dot(dir);
    if (slope >= 0.0) {
      // History spoiled the descent property; the bare preconditioned
      // gradient cannot, since the blocks are positive definite.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = grad;
      apply_precond(dir);
      dir = -dir;
      slope = grad.dot(dir);
    }
    double f_next = f;
    const double t = wolfe(dir, f, slope, &f_next);
    if (t <= 0.0 || f_next >= f) break;  // no progress possible
    const Eigen::VectorXd s = t * dir;
    const Eigen::VectorXd y = gtry - grad;
    w += s;
    f = f_next;
    grad = gtry;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    ++since_refresh;
  }
  *grad_norm = pr.original_grad_inf(grad);
  *converged = *grad_norm <= tol;
}

}  // namespace

MnlModel fit_mnl(const Eigen::MatrixXd& x, const std::vector<int>& g,
                 double reg, int max_iter, double tol) {
  if (reg < 0.0) throw ConfigError("mnl: ridge weight must be >= 0");
  int m = 0;
  validate(x, g, &m);
  MnlProblem pr = make_problem(x, g, m, reg);
  Eigen::VectorXd w = initial_point(pr, g);

  MnlModel model;
  model.reg = reg;
  // The blocked Hessian costs n * d^2 to form, so full Newton is reserved
  // for small parameter counts and L-BFGS handles the rest.
  if (pr.dim() <= 400)
    solve_newton(pr, w, tol, max_iter, &model.converged, &model.grad_norm,
                 &model.iterations);
  else
    solve_lbfgs(pr, w, tol, max_iter, &model.converged, &model.grad_norm,
                &model.iterations);

  const int p = static_cast<int>(x.cols());
  const Eigen::Map<const Eigen::MatrixXd> theta_s(w.data(), p + 1, m - 1);
  model.theta = Eigen::MatrixXd::Zero(m, p + 1);
  for (int a = 0; a < m - 1; ++a) {
    double intercept = theta_s(0, a);
    for (int j = 0; j < p; ++j) {
      const double slope = theta_s(j + 1, a) / pr.scale(j);
      model.theta(a, j + 1) = slope;
      intercept -= slope * pr.mean(j);
    }
    model.theta(a, 0) = intercept;
  }
  return model;
}

Eigen::MatrixXd mnl_probabilities(const Eigen::MatrixXd& theta,
                                  const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int m = static_cast<int>(theta.rows());
  if (theta.cols() != x.cols() + 1)
    throw DataError("mnl: coefficient width does not match covariate count");
  Eigen::MatrixXd z(n, m);
  z.noalias() = x * theta.rightCols(x.cols()).transpose();
  z.rowwise() += theta.col(0).transpose();
  Eigen::MatrixXd prob(n, m);
  for (int i = 0; i < n; ++i) {
    const double zmax = z.row(i).maxCoeff();
    prob.row(i) = (z.row(i).array() - zmax).exp();
    prob.row(i) /= prob.row(i).sum();
  }
  return prob;
}

double mnl_log_likelihood(const Eigen::MatrixXd& theta,
                          const Eigen::MatrixXd& x, const std::vector<int>& g,
                          double reg) {
  const int n = static_cast<int>(x.rows());
  if (static_cast<int>(g.size()) != n)
    throw DataError("mnl: label count does not match row count");
  const Eigen::MatrixXd prob = mnl_probabilities(theta, x);
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    if (g[i] < 0 || g[i] >= theta.rows())
      throw DataError("mnl: class label out of range");
    ll += std::log(prob(i, g[i]));
  }
  const int m = static_cast<int>(theta.rows());
  double pen = theta.block(0, 1, m - 1, theta.cols() - 1).squaredNorm();
  return ll - 0.5 * reg * pen;
}

Eigen::MatrixXd mnl_gradient(const Eigen::MatrixXd& theta,
                             const Eigen::MatrixXd& x, const std::vector<int>& g,
                             double reg) {
  const int n = static_cast<int>(x.rows());
  const int m = static_cast<int>(theta.rows());
  if (static_cast<int>(g.size()) != n)
    throw DataError("mnl: label count does not match row count");
  const Eigen::MatrixXd prob = mnl_probabilities(theta, x);
  Eigen::MatrixXd resid = -prob.leftCols(m - 1);
  for (int i = 0; i < n; ++i) {
    if (g[i] < 0 || g[i] >= m) throw DataError("mnl: class label out of range");
    if (g[i] < m - 1) resid(i, g[i]) += 1.0;
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(m, theta.cols());
  grad.block(0, 0, m - 1, 1) = resid.colwise().sum().transpose();
  grad.block(0, 1, m - 1, x.cols()).noalias() = resid.transpose() * x;
  grad.block(0, 1, m - 1, x.cols()) -=
      reg * theta.block(0, 1, m - 1, x.cols());
  return grad;
}

}  // namespace catenc
