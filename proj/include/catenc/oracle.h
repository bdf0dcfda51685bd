#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "catenc/rng.h"

namespace catenc {

// Fully enumerable discrete latent-state model: K latent levels, M observed
// categories, finite covariate support. Everything needed to evaluate
// E[Y|X,G] exactly, both directly and through the category representations.
struct LatentWorld {
  int k_latent = 0;  // K
  int m_groups = 0;  // M
  int p = 0;
  std::vector<Eigen::VectorXd> x_support;  // S points in R^p
  Eigen::VectorXd pi_l;                    // K, P(L=l), strictly positive
  Eigen::MatrixXd g_given_l;               // K x M, P(G=g|L=l)
  Eigen::MatrixXd psi;                     // K x M, P(L=l|G=g)
  Eigen::MatrixXd px_given_l;              // K x S, P(X=x_s|L=l)
  Eigen::MatrixXd m_yl;                    // S x K, E[Y|X=x_s,L=l]
  Eigen::VectorXd pg;                      // M, P(G=g)
  Eigen::MatrixXd a;                       // p x K, E[X|L=l] columns
};

// Random strictly-positive world; redrawn until the latent-means matrix has
// full column rank (smallest singular value > 1e-6). Requires p >= K and
// support_size >= K.
LatentWorld build_world(int k_latent, int m_groups, int p, int support_size,
                        Rng& rng);

// p x M matrix of E[X|G=g] columns, by enumeration over (L, X).
Eigen::MatrixXd world_omega(const LatentWorld& w);

// E[Y|X = x_support[x_index], G = g], four routes. The first conditions on
// the enumerated joint; the others evaluate the representation formula with
// psi itself, with A^+ omega(g), and with the rank-truncated SVD of omega^T.
double mu_direct(const LatentWorld& w, int x_index, int g);
double mu_via_psi(const LatentWorld& w, int x_index, int g);
double mu_via_means(const LatentWorld& w, int x_index, int g);
double mu_via_lowrank(const LatentWorld& w, int x_index, int g);

// Moment identity behind the logit encoder: in a world where P(G|X) is
// exactly multinomial logit with parameters theta_star, the fitted
// coefficients must satisfy E[X Lambda(g|X)] / E[Lambda(g|X)] = E[X|G=g].
// The left side is Monte-Carlo averaged over a fresh X sample (size n_mc),
// the right side is the empirical conditional mean of the fitted sample.
struct MnlMomentReport {
  double max_discrepancy = 0.0;  // max over g of the inf-norm gap
  Eigen::MatrixXd f_theta;       // p x M
  Eigen::MatrixXd omega_hat;     // p x M
  int n_fit = 0;
  int n_mc = 0;
  bool converged = false;
};

MnlMomentReport mnl_moment_check(const Eigen::MatrixXd& theta_star, int n,
                                 std::uint64_t seed, int n_mc = 200000);

}  // namespace catenc
