#include "catenc/simulate.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "catenc/errors.h"

namespace catenc {

SimSetup sim_setup_from_string(const std::string& s) {
  if (s == "global_linear") return SimSetup::global_linear;
  if (s == "latent_linear") return SimSetup::latent_linear;
  if (s == "latent_piecewise") return SimSetup::latent_piecewise;
  throw ConfigError("unknown simulation setup '" + s + "'");
}

std::string to_string(SimSetup s) {
  switch (s) {
    case SimSetup::global_linear: return "global_linear";
    case SimSetup::latent_linear: return "latent_linear";
    case SimSetup::latent_piecewise: return "latent_piecewise";
  }
  return "?";
}

namespace {

void validate(const SimConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("simulate: n must be >= 1");
  if (cfg.num_latent < 1) throw ConfigError("simulate: need >= 1 latent level");
  if (cfg.num_groups < cfg.num_latent ||
      cfg.num_groups % cfg.num_latent != 0)
    throw ConfigError("simulate: group count must be a multiple of the latent count");
  if (cfg.p < 3) throw ConfigError("simulate: p must be >= 3");
  if (!(cfg.p_assign > 0.5) || cfg.p_assign > 1.0)
    throw ConfigError("simulate: p_assign must be in (0.5, 1]");
}

// Entries drawn uniformly from {-1, 0, +1}, then scaled to unit L2 norm.
// All-zero draws (probability 3^-p) are redrawn.
Eigen::VectorXd unit_sign_vector(int p, Rng& rng) {
  Eigen::VectorXd v(p);
  for (int tries = 0; tries < 1000; ++tries) {
    for (int j = 0; j < p; ++j)
      v(j) = static_cast<double>(rng.below(3)) - 1.0;
    const double norm = v.norm();
    if (norm > 0.0) return v / norm;
  }
  throw NumericError("simulate: slope draw kept coming up all-zero");
}

double column_median(const Eigen::MatrixXd& x, int j) {
  std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
  std::sort(col.begin(), col.end());
  const std::size_t n = col.size();
  if (n % 2 == 1) return col[n / 2];
  return 0.5 * (col[n / 2 - 1] + col[n / 2]);
}

// Substream tags. Each stage draws from its own derived stream so that
// perturbing one stage cannot shift any other.
constexpr std::uint64_t kParamsStream = 1;
constexpr std::uint64_t kLatentStream = 2;
constexpr std::uint64_t kGroupsStream = 3;
constexpr std::uint64_t kCovariatesStream = 4;
constexpr std::uint64_t kNoiseStream = 5;

}  // namespace

SimParams draw_params(const SimConfig& cfg, Rng& rng) {
  const int l = cfg.num_latent;
  const int p = cfg.p;
  SimParams pr;

  // Latent means: +-1 on a 3-element support per level, 0 elsewhere.
  pr.mu = Eigen::MatrixXd::Zero(l, p);
  std::vector<int> shared;
  if (cfg.shared_support) {
    std::vector<int> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    shared.assign(idx.begin(), idx.begin() + 3);
  }
  for (int a = 0; a < l; ++a) {
    std::vector<int> support = shared;
    if (support.empty()) {
      std::vector<int> idx(p);
      std::iota(idx.begin(), idx.end(), 0);
      rng.shuffle(idx);
      support.assign(idx.begin(), idx.begin() + 3);
    }
    for (int j : support) pr.mu(a, j) = rng.below(2) == 0 ? -1.0 : 1.0;
  }

  pr.sigma.resize(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) pr.sigma(r, c) = std::pow(0.5, std::abs(r - c));

  pr.alpha.resize(l);
  for (int a = 0; a < l; ++a) pr.alpha(a) = rng.laplace();

  // Slopes for every setup are drawn regardless of which one is requested,
  // so the params substream has the same layout across setups.
  pr.beta = unit_sign_vector(p, rng);
  pr.beta_l.resize(l, p);
  pr.beta_plus.resize(l, p);
  pr.beta_minus.resize(l, p);
  for (int a = 0; a < l; ++a) pr.beta_l.row(a) = unit_sign_vector(p, rng);
  for (int a = 0; a < l; ++a) pr.beta_plus.row(a) = unit_sign_vector(p, rng);
  for (int a = 0; a < l; ++a) pr.beta_minus.row(a) = unit_sign_vector(p, rng);
  return pr;
}

std::vector<int> draw_latent(const SimConfig& cfg, Rng& rng) {
  std::vector<int> latent(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    latent[i] = static_cast<int>(rng.below(cfg.num_latent));
  return latent;
}

std::vector<int> draw_groups(const std::vector<int>& latent,
                             const SimConfig& cfg, Rng& rng) {
  const int m = cfg.num_groups;
  const int block = m / cfg.num_latent;
  std::vector<int> g(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const int start = latent[i] * block;
    if (m == block || rng.uniform() < cfg.p_assign) {
      g[i] = start + static_cast<int>(rng.below(block));
    } else {
      // Uniform over the m - block categories outside the latent block.
      const int r = static_cast<int>(rng.below(m - block));
      g[i] = r < start ? r : r + block;
    }
  }
  return g;
}

Eigen::MatrixXd draw_covariates(const std::vector<int>& latent,
                                const SimParams& params, Rng& rng) {
  const int n = static_cast<int>(latent.size());
  const int p = static_cast<int>(params.sigma.rows());
  const Eigen::LLT<Eigen::MatrixXd> llt(params.sigma);
  if (llt.info() != Eigen::Success)
    throw NumericError("simulate: covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    x.row(i) = params.mu.row(latent[i]) + (chol * z).transpose();
  }
  return x;
}

Eigen::VectorXd gen_outcome(SimSetup setup, const Eigen::MatrixXd& x,
                            const std::vector<int>& latent, SimParams& params,
                            const Eigen::VectorXd& noise) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (static_cast<int>(latent.size()) != n || noise.size() != n)
    throw DataError("simulate: outcome input lengths disagree");
  Eigen::VectorXd y(n);
  switch (setup) {
    case SimSetup::global_linear:
      for (int i = 0; i < n; ++i)
        y(i) = params.alpha(latent[i]) + x.row(i).dot(params.beta) + noise(i);
      break;
    case SimSetup::latent_linear:
      for (int i = 0; i < n; ++i)
        y(i) = params.alpha(latent[i]) +
               x.row(i).dot(params.beta_l.row(latent[i])) + noise(i);
      break;
    case SimSetup::latent_piecewise: {
      params.medians.resize(p);
      for (int j = 0; j < p; ++j) params.medians(j) = column_median(x, j);
      for (int i = 0; i < n; ++i) {
        const int a = latent[i];
        double v = params.alpha(a);
        for (int j = 0; j < p; ++j) {
          const double slope = x(i, j) > params.medians(j)
                                   ? params.beta_plus(a, j)
                                   : params.beta_minus(a, j);
          v += x(i, j) * slope;
        }
        y(i) = v + noise(i);
      }
      break;
    }
  }
  return y;
}

Eigen::VectorXd gen_outcome(SimSetup setup, const Eigen::MatrixXd& x,
                            const std::vector<int>& latent, SimParams& params,
                            Rng& rng) {
  Eigen::VectorXd noise(x.rows());
  for (int i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
  return gen_outcome(setup, x, latent, params, noise);
}

SimOutput simulate(const SimConfig& cfg) {
  validate(cfg);
  SimOutput out;

  Rng params_rng(derive_seed(cfg.seed, kParamsStream));
  out.params = draw_params(cfg, params_rng);

  Rng latent_rng(derive_seed(cfg.seed, kLatentStream));
  out.latent = draw_latent(cfg, latent_rng);

  // Redraw the whole group vector on the rare event that a category ends up
  // empty; each attempt uses its own stream nested under the groups stream.
  const std::uint64_t groups_seed = derive_seed(cfg.seed, kGroupsStream);
  std::vector<int> g;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng groups_rng(derive_seed(groups_seed, attempt));
    g = draw_groups(out.latent, cfg, groups_rng);
    std::vector<int> counts(cfg.num_groups, 0);
    for (int gi : g) ++counts[gi];
    if (std::all_of(counts.begin(), counts.end(),
                    [](int c) { return c > 0; }))
      break;
    g.clear();
    ++out.regen_count;
  }
  if (g.empty())
    throw DataError("simulate: some category stayed empty after 100 redraws; "
                    "n is too small for this group count");

  Rng cov_rng(derive_seed(cfg.seed, kCovariatesStream));
  Eigen::MatrixXd x = draw_covariates(out.latent, out.params, cov_rng);

  Rng noise_rng(derive_seed(cfg.seed, kNoiseStream));
  Eigen::VectorXd y = gen_outcome(cfg.setup, x, out.latent, out.params, noise_rng);

  std::vector<std::string> level_names(cfg.num_groups);
  for (int l = 0; l < cfg.num_groups; ++l) level_names[l] = std::to_string(l);
  out.dataset = make_dataset(std::move(x), std::move(g), std::move(y),
                             std::move(level_names));
  return out;
}

std::string sim_params_to_json(const SimConfig& cfg, const SimParams& p,
                               int regen_count) {
  nlohmann::json j;
  j["config"] = {{"n", cfg.n},
                 {"num_latent", cfg.num_latent},
                 {"num_groups", cfg.num_groups},
                 {"p", cfg.p},
                 {"p_assign", cfg.p_assign},
                 {"setup", to_string(cfg.setup)},
                 {"seed", cfg.seed},
                 {"shared_support", cfg.shared_support}};
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r].push_back(m(r, c));
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["params"]["mu"] = mat(p.mu);
  j["params"]["alpha"] = vec(p.alpha);
  j["params"]["beta"] = vec(p.beta);
  j["params"]["beta_l"] = mat(p.beta_l);
  j["params"]["beta_plus"] = mat(p.beta_plus);
  j["params"]["beta_minus"] = mat(p.beta_minus);
  if (p.medians.size() > 0) j["params"]["medians"] = vec(p.medians);
  j["regen_count"] = regen_count;
  return j.dump(2) + "\n";
}

}  // namespace catenc
