#include "catenc/oracle.h"

#include <cmath>

#include <Eigen/Dense>

#include "catenc/encoders.h"
#include "catenc/errors.h"
#include "catenc/linalg.h"
#include "catenc/mnl.h"

namespace catenc {

namespace {

// Strictly positive pmf with entries bounded away from zero, so that every
// conditioning event in the world has workable mass.
Eigen::VectorXd random_pmf(int size, Rng& rng) {
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = rng.uniform(0.1, 1.0);
  return v / v.sum();
}

}  // namespace

LatentWorld build_world(int k_latent, int m_groups, int p, int support_size,
                        Rng& rng) {
  if (k_latent < 1 || m_groups < 1 || p < 1)
    throw ConfigError("build_world: dimensions must be >= 1");
  if (p < k_latent || support_size < k_latent)
    throw ConfigError(
        "build_world: p and the support size must be >= the latent count "
        "for the latent means to have full column rank");
  for (int attempt = 0; attempt < 100; ++attempt) {
    LatentWorld w;
    w.k_latent = k_latent;
    w.m_groups = m_groups;
    w.p = p;
    w.pi_l = random_pmf(k_latent, rng);
    w.g_given_l.resize(k_latent, m_groups);
    for (int l = 0; l < k_latent; ++l)
      w.g_given_l.row(l) = random_pmf(m_groups, rng).transpose();
    w.x_support.resize(support_size);
    for (int s = 0; s < support_size; ++s) {
      w.x_support[s].resize(p);
      for (int j = 0; j < p; ++j) w.x_support[s](j) = rng.uniform(-2.0, 2.0);
    }
    w.px_given_l.resize(k_latent, support_size);
    for (int l = 0; l < k_latent; ++l)
      w.px_given_l.row(l) = random_pmf(support_size, rng).transpose();
    w.m_yl.resize(support_size, k_latent);
    for (int s = 0; s < support_size; ++s)
      for (int l = 0; l < k_latent; ++l) w.m_yl(s, l) = rng.uniform(-1.0, 1.0);

    w.a.setZero(p, k_latent);
    for (int l = 0; l < k_latent; ++l)
      for (int s = 0; s < support_size; ++s)
        w.a.col(l) += w.px_given_l(l, s) * w.x_support[s];
    const SvdFactors f = svd(w.a);
    if (f.d(f.d.size() - 1) <= 1e-6) continue;  // keep A left-invertible

    w.pg.setZero(m_groups);
    for (int g = 0; g < m_groups; ++g)
      for (int l = 0; l < k_latent; ++l)
        w.pg(g) += w.pi_l(l) * w.g_given_l(l, g);
    w.psi.resize(k_latent, m_groups);
    for (int g = 0; g < m_groups; ++g)
      for (int l = 0; l < k_latent; ++l)
        w.psi(l, g) = w.pi_l(l) * w.g_given_l(l, g) / w.pg(g);
    return w;
  }
  throw NumericError("build_world: no well-conditioned world in 100 draws");
}

Eigen::MatrixXd world_omega(const LatentWorld& w) {
  // E[X|G=g] by explicit enumeration over (L, X); the matrix identity
  // omega = A * psi is what tests compare this against.
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(w.p, w.m_groups);
  for (int g = 0; g < w.m_groups; ++g)
    for (int l = 0; l < w.k_latent; ++l)
      for (std::size_t s = 0; s < w.x_support.size(); ++s)
        omega.col(g) += w.psi(l, g) * w.px_given_l(l, static_cast<int>(s)) *
                        w.x_support[s];
  return omega;
}

double mu_direct(const LatentWorld& w, int x_index, int g) {
  if (x_index < 0 || x_index >= static_cast<int>(w.x_support.size()))
    throw ConfigError("mu: support index out of range");
  if (g < 0 || g >= w.m_groups) throw ConfigError("mu: category out of range");
  // P(L=l, X=x, G=g) = pi_l P(g|l) P(x|l); condition on (x, g) and average
  // the conditional outcome means.
  double num = 0.0, den = 0.0;
  for (int l = 0; l < w.k_latent; ++l) {
    const double joint = w.pi_l(l) * w.g_given_l(l, g) * w.px_given_l(l, x_index);
    num += w.m_yl(x_index, l) * joint;
    den += joint;
  }
  if (den <= 0.0) throw NumericError("mu: conditioning event has zero mass");
  return num / den;
}

namespace {

// The representation formula: weights psi_tilde need not be the true latent
// posterior, only some sufficient surrogate for the category.
double mu_from_weights(const LatentWorld& w, int x_index,
                       const Eigen::VectorXd& psi_tilde) {
  double num = 0.0, den = 0.0;
  for (int l = 0; l < w.k_latent; ++l) {
    const double wt = w.px_given_l(l, x_index) * psi_tilde(l);
    num += w.m_yl(x_index, l) * wt;
    den += wt;
  }
  if (den <= 0.0) throw NumericError("mu: conditioning event has zero mass");
  return num / den;
}

}  // namespace

double mu_via_psi(const LatentWorld& w, int x_index, int g) {
  if (x_index < 0 || x_index >= static_cast<int>(w.x_support.size()))
    throw ConfigError("mu: support index out of range");
  if (g < 0 || g >= w.m_groups) throw ConfigError("mu: category out of range");
  return mu_from_weights(w, x_index, w.psi.col(g));
}

double mu_via_means(const LatentWorld& w, int x_index, int g) {
  if (x_index < 0 || x_index >= static_cast<int>(w.x_support.size()))
    throw ConfigError("mu: support index out of range");
  if (g < 0 || g >= w.m_groups) throw ConfigError("mu: category out of range");
  const Eigen::MatrixXd omega = world_omega(w);
  const Eigen::VectorXd psi_tilde = pseudo_inverse(w.a) * omega.col(g);
  return mu_from_weights(w, x_index, psi_tilde);
}

double mu_via_lowrank(const LatentWorld& w, int x_index, int g) {
  if (x_index < 0 || x_index >= static_cast<int>(w.x_support.size()))
    throw ConfigError("mu: support index out of range");
  if (g < 0 || g >= w.m_groups) throw ConfigError("mu: category out of range");
  const Eigen::MatrixXd omega = world_omega(w);
  const SvdFactors f = svd(omega.transpose());
  // Truncate at the numerical rank; u(g) plus the fixed (D, V) then
  // reconstructs omega(g).
  int rank = 0;
  const double cutoff = 1e-10 * std::max(omega.rows(), omega.cols()) *
                        (f.d.size() > 0 ? f.d(0) : 0.0);
  while (rank < f.d.size() && f.d(rank) > cutoff) ++rank;
  const Eigen::VectorXd u_g = f.u.row(g).head(rank).transpose();
  const Eigen::VectorXd omega_g =
      f.v.leftCols(rank) * f.d.head(rank).asDiagonal() * u_g;
  const Eigen::VectorXd psi_tilde = pseudo_inverse(w.a) * omega_g;
  return mu_from_weights(w, x_index, psi_tilde);
}

MnlMomentReport mnl_moment_check(const Eigen::MatrixXd& theta_star, int n,
                                 std::uint64_t seed, int n_mc) {
  const int m = static_cast<int>(theta_star.rows());
  const int p = static_cast<int>(theta_star.cols()) - 1;
  if (m < 2 || p < 1)
    throw ConfigError("mnl_moment_check: theta must be M x (p+1), M >= 2");
  if (n < m || n_mc < 1)
    throw ConfigError("mnl_moment_check: sample sizes too small");

  // Sample (X, G) with X standard normal and G|X exactly multinomial logit.
  // Resample wholesale if some category comes up empty.
  Eigen::MatrixXd x(n, p);
  std::vector<int> g(n);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    Rng xrng(derive_seed(derive_seed(seed, 1), attempt));
    Rng grng(derive_seed(derive_seed(seed, 2), attempt));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = xrng.normal();
    const Eigen::MatrixXd prob = mnl_probabilities(theta_star, x);
    std::vector<int> counts(m, 0);
    for (int i = 0; i < n; ++i) {
      const double u = grng.uniform();
      double acc = 0.0;
      int pick = m - 1;
      for (int a = 0; a < m; ++a) {
        acc += prob(i, a);
        if (u < acc) {
          pick = a;
          break;
        }
      }
      g[i] = pick;
      ++counts[pick];
    }
    ok = true;
    for (int a = 0; a < m; ++a)
      if (counts[a] == 0) ok = false;
  }
  if (!ok)
    throw DataError("mnl_moment_check: a category stayed empty after resampling");

  const MnlModel model = fit_mnl(x, g);
  const GroupMeans gm = group_averages(x, g, m);

  // Fresh X sample for the moment side, so the reported gap carries real
  // Monte-Carlo content. (On the fitting sample itself the score equations
  // make the identity hold automatically.)
  Eigen::MatrixXd x_mc(n_mc, p);
  Rng mcrng(derive_seed(seed, 3));
  for (int i = 0; i < n_mc; ++i)
    for (int j = 0; j < p; ++j) x_mc(i, j) = mcrng.normal();
  const Eigen::MatrixXd prob_mc = mnl_probabilities(model.theta, x_mc);

  MnlMomentReport rep;
  rep.n_fit = n;
  rep.n_mc = n_mc;
  rep.converged = model.converged;
  rep.f_theta.resize(p, m);
  rep.omega_hat = gm.omega;
  for (int a = 0; a < m; ++a) {
    const Eigen::VectorXd lam = prob_mc.col(a);
    const double den = lam.sum();
    rep.f_theta.col(a) = (x_mc.transpose() * lam) / den;
    const double gap =
        (rep.f_theta.col(a) - rep.omega_hat.col(a)).lpNorm<Eigen::Infinity>();
    rep.max_discrepancy = std::max(rep.max_discrepancy, gap);
  }
  return rep;
}

}  // namespace catenc
