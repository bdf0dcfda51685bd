#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "catenc/dataset.h"
#include "catenc/rng.h"

namespace catenc {

enum class SimSetup { global_linear, latent_linear, latent_piecewise };

SimSetup sim_setup_from_string(const std::string& s);
std::string to_string(SimSetup s);

struct SimConfig {
  int n = 0;
  int num_latent = 1;      // |L|
  int num_groups = 1;      // M, multiple of |L|
  int p = 3;               // covariate dimension, >= 3
  double p_assign = 0.9;   // in-block assignment probability, in (0.5, 1]
  SimSetup setup = SimSetup::global_linear;
  std::uint64_t seed = 0;
  bool shared_support = false;  // one mean-support set shared by all levels
};

struct SimParams {
  Eigen::MatrixXd mu;          // |L| x p latent means, +-1 on 3 entries
  Eigen::MatrixXd sigma;       // p x p, (1/2)^|k-j|
  Eigen::VectorXd alpha;       // |L| intercepts, Laplace(0,1)
  Eigen::VectorXd beta;        // p, global_linear slope, unit norm
  Eigen::MatrixXd beta_l;      // |L| x p, latent_linear slopes, unit rows
  Eigen::MatrixXd beta_plus;   // |L| x p, latent_piecewise
  Eigen::MatrixXd beta_minus;  // |L| x p
  Eigen::VectorXd medians;     // p, empirical feature medians (piecewise)
};

struct SimOutput {
  Dataset dataset;
  std::vector<int> latent;  // n, in [0, |L|)
  SimParams params;
  int regen_count = 0;  // group redraws forced by an empty category
};

SimParams draw_params(const SimConfig& cfg, Rng& rng);
std::vector<int> draw_latent(const SimConfig& cfg, Rng& rng);
std::vector<int> draw_groups(const std::vector<int>& latent,
                             const SimConfig& cfg, Rng& rng);
Eigen::MatrixXd draw_covariates(const std::vector<int>& latent,
                                const SimParams& params, Rng& rng);

// Outcome with explicit noise vector (tests pass zeros to strip the noise).
// For the piecewise setup the empirical medians are computed here and stored
// back into params.
Eigen::VectorXd gen_outcome(SimSetup setup, const Eigen::MatrixXd& x,
                            const std::vector<int>& latent, SimParams& params,
                            const Eigen::VectorXd& noise);
Eigen::VectorXd gen_outcome(SimSetup setup, const Eigen::MatrixXd& x,
                            const std::vector<int>& latent, SimParams& params,
                            Rng& rng);

// Composes the draws under one seed. Each stage (params, latent, groups,
// covariates, noise) runs on its own substream, so perturbing one stage
// cannot shift another. Group labels are redrawn (bounded retries) if some
// category ends up empty.
SimOutput simulate(const SimConfig& cfg);

// Params file emitted next to the simulated CSV.
std::string sim_params_to_json(const SimConfig& cfg, const SimParams& p,
                               int regen_count);

}  // namespace catenc
