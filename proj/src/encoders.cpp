#include "catenc/encoders.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "catenc/errors.h"
#include "catenc/rng.h"

namespace catenc {

EncMethod enc_method_from_string(const std::string& s) {
  if (s == "onehot") return EncMethod::onehot;
  if (s == "deviation") return EncMethod::deviation;
  if (s == "difference") return EncMethod::difference;
  if (s == "helmert") return EncMethod::helmert;
  if (s == "repeated") return EncMethod::repeated;
  if (s == "permutation") return EncMethod::permutation;
  if (s == "multiperm") return EncMethod::multiperm;
  if (s == "fisher") return EncMethod::fisher;
  if (s == "means") return EncMethod::means;
  if (s == "lowrank") return EncMethod::lowrank;
  if (s == "sparselowrank") return EncMethod::sparselowrank;
  if (s == "mnl") return EncMethod::mnl;
  throw ConfigError("unknown encoding method '" + s + "'");
}

std::string to_string(EncMethod m) {
  switch (m) {
    case EncMethod::onehot: return "onehot";
    case EncMethod::deviation: return "deviation";
    case EncMethod::difference: return "difference";
    case EncMethod::helmert: return "helmert";
    case EncMethod::repeated: return "repeated";
    case EncMethod::permutation: return "permutation";
    case EncMethod::multiperm: return "multiperm";
    case EncMethod::fisher: return "fisher";
    case EncMethod::means: return "means";
    case EncMethod::lowrank: return "lowrank";
    case EncMethod::sparselowrank: return "sparselowrank";
    case EncMethod::mnl: return "mnl";
  }
  return "?";
}

bool is_contrast(EncMethod m) {
  return m == EncMethod::onehot || m == EncMethod::deviation ||
         m == EncMethod::difference || m == EncMethod::helmert ||
         m == EncMethod::repeated;
}

bool is_integer(EncMethod m) {
  return m == EncMethod::permutation || m == EncMethod::multiperm ||
         m == EncMethod::fisher;
}

GroupMeans group_averages(const Eigen::MatrixXd& x, const std::vector<int>& g,
                          int m_levels,
                          const std::vector<std::string>* level_names) {
  const int n = static_cast<int>(x.rows());
  if (static_cast<int>(g.size()) != n)
    throw DataError("group_averages: category length does not match row count");
  GroupMeans gm;
  gm.omega = Eigen::MatrixXd::Zero(x.cols(), m_levels);
  gm.counts.assign(m_levels, 0);
  for (int i = 0; i < n; ++i) {
    const int gi = g[i];
    if (gi < 0 || gi >= m_levels)
      throw DataError("group_averages: category index out of range");
    gm.omega.col(gi) += x.row(i).transpose();
    ++gm.counts[gi];
  }
  for (int l = 0; l < m_levels; ++l) {
    if (gm.counts[l] == 0) {
      const std::string name = level_names && l < static_cast<int>(level_names->size())
                                   ? (*level_names)[l]
                                   : std::to_string(l);
      throw DataError("group_averages: category '" + name + "' has no rows");
    }
    gm.omega.col(l) /= gm.counts[l];
  }
  return gm;
}

GroupMeans group_averages(const Dataset& d) {
  return group_averages(d.x, d.g, d.m(), &d.level_names);
}

Eigen::MatrixXd contrast_table(EncMethod scheme, int m) {
  if (!is_contrast(scheme))
    throw ConfigError("contrast_table: '" + to_string(scheme) +
                      "' is not a contrast scheme");
  if (m < 2) throw ConfigError("contrast_table: need at least 2 levels");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m - 1);
  switch (scheme) {
    case EncMethod::onehot:
      // First level is the reference row of zeros.
      for (int j = 0; j < m - 1; ++j) t(j + 1, j) = 1.0;
      break;
    case EncMethod::deviation:
      for (int j = 0; j < m - 1; ++j) t(j, j) = 1.0;
      t.row(m - 1).setConstant(-1.0);
      break;
    case EncMethod::difference:
      // Column j contrasts level j+1 against the mean of levels 0..j.
      for (int j = 0; j < m - 1; ++j) {
        for (int g = 0; g <= j; ++g) t(g, j) = -1.0 / (j + 2);
        t(j + 1, j) = (j + 1.0) / (j + 2);
      }
      break;
    case EncMethod::helmert:
      // Column j contrasts level j against the mean of levels j+1..M-1.
      for (int j = 0; j < m - 1; ++j) {
        t(j, j) = (m - 1.0 - j) / (m - j);
        for (int g = j + 1; g < m; ++g) t(g, j) = -1.0 / (m - j);
      }
      break;
    case EncMethod::repeated:
      // Column j contrasts the mean of levels 0..j against that of j+1..M-1.
      for (int j = 0; j < m - 1; ++j) {
        for (int g = 0; g <= j; ++g) t(g, j) = (m - 1.0 - j) / m;
        for (int g = j + 1; g < m; ++g) t(g, j) = -(j + 1.0) / m;
      }
      break;
    default:
      break;
  }
  return t;
}

FittedEncoder fit_contrast(EncMethod scheme, const Dataset& d) {
  FittedEncoder e;
  e.method = scheme;
  e.level_names = d.level_names;
  e.table = contrast_table(scheme, d.m());
  e.output_dim = d.m() - 1;
  return e;
}

FittedEncoder fit_means(const Dataset& d) {
  if (d.p() < 1) throw ConfigError("means encoding needs at least one covariate");
  FittedEncoder e;
  e.method = EncMethod::means;
  e.level_names = d.level_names;
  e.means = group_averages(d);
  e.global_mean = d.x.colwise().mean();
  e.output_dim = d.p();
  return e;
}

FittedEncoder fit_lowrank(const Dataset& d, int k) {
  const int kmax = std::min(d.m(), d.p());
  if (k < 1 || k > kmax)
    throw ConfigError("lowrank: k must be in 1.." + std::to_string(kmax));
  FittedEncoder e;
  e.method = EncMethod::lowrank;
  e.level_names = d.level_names;
  e.means = group_averages(d);
  // Rows of omega^T are categories, so U rows are per-category coordinates.
  e.factors = svd(e.means.omega.transpose());
  e.k = k;
  e.output_dim = k;
  return e;
}

FittedEncoder fit_sparse_lowrank(const Dataset& d, int k, double lambda,
                                 double lambda1) {
  const int kmax = std::min(d.m(), d.p());
  if (k < 1 || k > kmax)
    throw ConfigError("sparselowrank: k must be in 1.." + std::to_string(kmax));
  if (lambda < 0.0 || lambda1 < 0.0)
    throw ConfigError("sparselowrank: penalties must be >= 0");
  FittedEncoder e;
  e.method = EncMethod::sparselowrank;
  e.level_names = d.level_names;
  const GroupMeans gm = group_averages(d);
  const Eigen::MatrixXd omega_t = gm.omega.transpose();
  e.spca = sparse_pca(omega_t, k, lambda, lambda1);
  e.z = omega_t * e.spca.b;
  e.k = k;
  e.output_dim = k;
  return e;
}

FittedEncoder fit_mnl_encoder(const Dataset& d, double reg) {
  if (d.m() < 2) throw ConfigError("mnl encoding needs at least 2 categories");
  FittedEncoder e;
  e.method = EncMethod::mnl;
  e.level_names = d.level_names;
  // The coefficients are consumed as k-NN features after z-scoring, so their
  // error only has to stay well under a feature standard deviation; 1e-4
  // spares a third of the optimizer iterations at M ~ 100.
  e.mnl = fit_mnl(d.x, d.g, reg, 500, 1e-4);
  e.output_dim = d.p() + 1;
  return e;
}

FittedEncoder integer_encode(EncMethod scheme, const Dataset& d,
                             std::uint64_t seed, int copies) {
  if (!is_integer(scheme))
    throw ConfigError("integer_encode: '" + to_string(scheme) +
                      "' is not an integer scheme");
  const int m = d.m();
  FittedEncoder e;
  e.method = scheme;
  e.level_names = d.level_names;
  if (scheme == EncMethod::fisher) {
    if (!d.y) throw ConfigError("fisher encoding requires a response column");
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < d.n(); ++i) sums(d.g[i]) += (*d.y)(i);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> mean(m);
    for (int l = 0; l < m; ++l) mean[l] = sums(l) / d.level_counts[l];
    // Rank categories by increasing response mean, ties by level index.
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return mean[a] < mean[b]; });
    e.table.resize(m, 1);
    for (int r = 0; r < m; ++r) e.table(order[r], 0) = r + 1.0;
    e.output_dim = 1;
    return e;
  }
  const int ncopies = scheme == EncMethod::permutation ? 1 : copies;
  if (ncopies < 1) throw ConfigError("multiperm needs at least one mapping");
  Rng rng(seed);
  e.table.resize(m, ncopies);
  std::vector<int> values(m);
  for (int c = 0; c < ncopies; ++c) {
    std::iota(values.begin(), values.end(), 1);
    rng.shuffle(values);
    for (int l = 0; l < m; ++l) e.table(l, c) = values[l];
  }
  e.output_dim = ncopies;
  return e;
}

FittedEncoder fit_encoder(EncMethod method, const Dataset& d,
                          const EncoderOptions& opts) {
  FittedEncoder e;
  if (is_contrast(method)) {
    e = fit_contrast(method, d);
  } else if (is_integer(method)) {
    e = integer_encode(method, d, opts.seed, opts.copies);
  } else if (method == EncMethod::means) {
    e = fit_means(d);
  } else if (method == EncMethod::lowrank) {
    e = fit_lowrank(d, opts.k);
  } else if (method == EncMethod::sparselowrank) {
    e = fit_sparse_lowrank(d, opts.k, opts.lambda, opts.lambda1);
  } else {
    e = fit_mnl_encoder(d, opts.reg);
  }
  e.unseen = opts.unseen;
  return e;
}

EncodingMatrix transform(const FittedEncoder& e, const Dataset& d) {
  const int n = d.n();
  EncodingMatrix out;
  out.s.resize(n, e.output_dim);
  for (int j = 0; j < e.output_dim; ++j)
    out.labels.push_back(to_string(e.method) + "_" + std::to_string(j + 1));

  // Row retrieval per training-catalog index.
  auto encoder_row = [&](int g) -> Eigen::RowVectorXd {
    switch (e.method) {
      case EncMethod::means:
        return e.means.omega.col(g).transpose();
      case EncMethod::lowrank:
        return e.factors.u.row(g).head(e.k);
      case EncMethod::sparselowrank:
        return e.z.row(g);
      case EncMethod::mnl:
        return e.mnl.theta.row(g);
      default:
        return e.table.row(g);
    }
  };
  Eigen::RowVectorXd fallback = Eigen::RowVectorXd::Zero(e.output_dim);
  if (e.method == EncMethod::means)
    fallback = e.global_mean.transpose();
  else if (is_integer(e.method))
    fallback.setConstant(static_cast<double>(e.level_names.size()) + 1.0);

  // Match categories through names, so independently loaded datasets whose
  // level indices differ still line up with the training catalog.
  std::unordered_map<std::string, int> catalog;
  for (std::size_t l = 0; l < e.level_names.size(); ++l)
    catalog.emplace(e.level_names[l], static_cast<int>(l));
  std::vector<int> remap(d.m());
  for (int l = 0; l < d.m(); ++l) {
    auto it = catalog.find(d.level_names[l]);
    remap[l] = it == catalog.end() ? -1 : it->second;
  }

  for (int i = 0; i < n; ++i) {
    const int g = remap[d.g[i]];
    if (g >= 0) {
      out.s.row(i) = encoder_row(g);
    } else if (e.unseen == UnseenPolicy::fallback) {
      out.s.row(i) = fallback;
    } else {
      throw DataError("transform: category '" + d.level_names[d.g[i]] +
                      "' was not seen at fit time");
    }
  }
  return out;
}

namespace {

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = data;
  return j;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ConfigError("encoder file: matrix payload has the wrong size");
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[idx++];
  return m;
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(),
                                           static_cast<Eigen::Index>(data.size()));
}

}  // namespace

void save_encoder(const FittedEncoder& e, const std::string& path) {
  nlohmann::json j;
  j["format"] = "encoder";
  j["version"] = 1;
  j["method"] = to_string(e.method);
  j["output_dim"] = e.output_dim;
  j["unseen"] = e.unseen == UnseenPolicy::error ? "error" : "fallback";
  j["level_names"] = e.level_names;
  nlohmann::json p;
  switch (e.method) {
    case EncMethod::means:
      p["omega"] = mat_to_json(e.means.omega);
      p["counts"] = e.means.counts;
      p["global_mean"] = vec_to_json(e.global_mean);
      break;
    case EncMethod::lowrank:
      p["u"] = mat_to_json(e.factors.u);
      p["d"] = vec_to_json(e.factors.d);
      p["v"] = mat_to_json(e.factors.v);
      p["k"] = e.k;
      break;
    case EncMethod::sparselowrank:
      p["a"] = mat_to_json(e.spca.a);
      p["b"] = mat_to_json(e.spca.b);
      p["lambda"] = e.spca.lambda;
      p["lambda1"] = vec_to_json(e.spca.lambda1);
      p["converged"] = e.spca.converged;
      p["z"] = mat_to_json(e.z);
      p["k"] = e.k;
      break;
    case EncMethod::mnl:
      p["theta"] = mat_to_json(e.mnl.theta);
      p["reg"] = e.mnl.reg;
      p["converged"] = e.mnl.converged;
      p["grad_norm"] = e.mnl.grad_norm;
      p["iterations"] = e.mnl.iterations;
      break;
    default:
      p["table"] = mat_to_json(e.table);
      break;
  }
  j["payload"] = p;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

FittedEncoder load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open encoder file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("encoder file is not valid JSON: ") + ex.what());
  }
  try {
    if (j.at("format").get<std::string>() != "encoder")
      throw ConfigError("not an encoder file");
    if (j.at("version").get<int>() != 1)
      throw ConfigError("unsupported encoder file version");
    FittedEncoder e;
    e.method = enc_method_from_string(j.at("method").get<std::string>());
    e.output_dim = j.at("output_dim").get<int>();
    const std::string unseen = j.at("unseen").get<std::string>();
    if (unseen == "error")
      e.unseen = UnseenPolicy::error;
    else if (unseen == "fallback")
      e.unseen = UnseenPolicy::fallback;
    else
      throw ConfigError("unknown unseen policy '" + unseen + "'");
    e.level_names = j.at("level_names").get<std::vector<std::string>>();
    const nlohmann::json& p = j.at("payload");
    switch (e.method) {
      case EncMethod::means:
        e.means.omega = mat_from_json(p.at("omega"));
        e.means.counts = p.at("counts").get<std::vector<int>>();
        e.global_mean = vec_from_json(p.at("global_mean"));
        break;
      case EncMethod::lowrank:
        e.factors.u = mat_from_json(p.at("u"));
        e.factors.d = vec_from_json(p.at("d"));
        e.factors.v = mat_from_json(p.at("v"));
        e.k = p.at("k").get<int>();
        break;
      case EncMethod::sparselowrank:
        e.spca.a = mat_from_json(p.at("a"));
        e.spca.b = mat_from_json(p.at("b"));
        e.spca.lambda = p.at("lambda").get<double>();
        e.spca.lambda1 = vec_from_json(p.at("lambda1"));
        e.spca.converged = p.at("converged").get<bool>();
        e.z = mat_from_json(p.at("z"));
        e.k = p.at("k").get<int>();
        break;
      case EncMethod::mnl:
        e.mnl.theta = mat_from_json(p.at("theta"));
        e.mnl.reg = p.at("reg").get<double>();
        e.mnl.converged = p.at("converged").get<bool>();
        e.mnl.grad_norm = p.at("grad_norm").get<double>();
        e.mnl.iterations = p.at("iterations").get<int>();
        break;
      default:
        e.table = mat_from_json(p.at("table"));
        break;
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("encoder file is malformed: ") + ex.what());
  }
}

}  // namespace catenc
