#include "catenc/bench.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "catenc/errors.h"
#include "catenc/stats.h"

namespace catenc {

FoldPlan stratified_kfold(const std::vector<int>& g, int folds, Rng& rng) {
  if (folds < 2) throw ConfigError("stratified_kfold: need at least 2 folds");
  int m = 0;
  for (int gi : g) m = std::max(m, gi + 1);
  std::vector<std::vector<int>> rows(m);
  for (std::size_t i = 0; i < g.size(); ++i)
    rows[g[i]].push_back(static_cast<int>(i));

  FoldPlan plan;
  plan.folds = folds;
  plan.assignment.assign(g.size(), -1);
  for (int l = 0; l < m; ++l) {
    if (static_cast<int>(rows[l].size()) < folds) {
      // Too few rows to put one in every fold; keep the category in every
      // training split so no test row ever carries an unseen category.
      std::fprintf(stderr,
                   "stratified_kfold: category %d has %zu rows (< %d folds), "
                   "keeping it out of the test folds\n",
                   l, rows[l].size(), folds);
      continue;
    }
    rng.shuffle(rows[l]);
    for (std::size_t r = 0; r < rows[l].size(); ++r)
      plan.assignment[rows[l][r]] = static_cast<int>(r) % folds;
  }
  return plan;
}

namespace {

// Z-score in place with training statistics; constant training columns go
// to 0 on both sides, dropping them from the distance. The variance cutoff
// is relative to the mean because summing n copies of the same value can
// leave rounding residue of order mean * eps.
void zscore_by_train(Eigen::MatrixXd& tr, Eigen::MatrixXd& te) {
  const int ntr = static_cast<int>(tr.rows());
  const int dim = static_cast<int>(tr.cols());
  Eigen::RowVectorXd mean = tr.colwise().mean();
  Eigen::RowVectorXd scale(dim);
  std::vector<bool> constant(dim, false);
  for (int j = 0; j < dim; ++j) {
    const double var = (tr.col(j).array() - mean(j)).square().sum() / ntr;
    constant[j] = var <= 1e-28 * (mean(j) * mean(j) + 1.0);
    scale(j) = constant[j] ? 1.0 : std::sqrt(var);
  }
  tr = (tr.rowwise() - mean).array().rowwise() / scale.array();
  te = (te.rowwise() - mean).array().rowwise() / scale.array();
  for (int j = 0; j < dim; ++j) {
    if (constant[j]) {
      tr.col(j).setZero();
      te.col(j).setZero();
    }
  }
}

// The neighbor set is the k smallest (distance, index) pairs: everything
// strictly below the k-th smallest distance, then lowest-index rows tied at
// it. Partitioning distances alone and rebuilding that set from a scan
// avoids hauling pairs through nth_element; the selected rows are summed in
// (distance, index) order so the result is independent of partition
// internals.
struct KnnScratch {
  std::vector<double> dist;
  std::vector<double> part;
  std::vector<int> sel;
};

double knn_mean_of_selected(KnnScratch& s, int k,
                            const Eigen::VectorXd& train_y) {
  const int ntr = static_cast<int>(s.dist.size());
  s.part = s.dist;
  std::nth_element(s.part.begin(), s.part.begin() + (k - 1), s.part.end());
  const double kth = s.part[k - 1];
  s.sel.clear();
  int ties = 0;
  for (int j = 0; j < ntr; ++j) {
    if (s.dist[j] < kth) s.sel.push_back(j);
  }
  const int need = k - static_cast<int>(s.sel.size());
  for (int j = 0; j < ntr && ties < need; ++j) {
    if (s.dist[j] == kth) {
      s.sel.push_back(j);
      ++ties;
    }
  }
  std::sort(s.sel.begin(), s.sel.end(), [&](int a, int b) {
    return s.dist[a] != s.dist[b] ? s.dist[a] < s.dist[b] : a < b;
  });
  double acc = 0.0;
  for (int j = 0; j < k; ++j) acc += train_y(s.sel[j]);
  return acc / k;
}

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Buffer rows per block of test points; a full nte x ntr product can run to
// tens of megabytes per call. Row major so per-row scans walk memory
// sequentially.
constexpr int kKnnTile = 256;

// k-NN predictions for a family of nested candidates: candidate c uses the
// base columns plus the first c extra columns. Z-scoring is per column, so
// candidate c's squared distance is candidate c-1's plus one column's
// contribution; one base product and a rank-one update per extra column
// replace a full distance pass per candidate.
Eigen::MatrixXd knn_prefix_predictions(const Eigen::MatrixXd& tr_base,
                                       const Eigen::MatrixXd& tr_extra,
                                       const Eigen::VectorXd& train_y,
                                       const Eigen::MatrixXd& te_base,
                                       const Eigen::MatrixXd& te_extra,
                                       int k) {
  const int ntr = static_cast<int>(tr_base.rows());
  const int nte = static_cast<int>(te_base.rows());
  const int kext = static_cast<int>(tr_extra.cols());
  if (k > ntr) {
    std::fprintf(stderr, "knn: k=%d exceeds %d training rows, clipping\n", k,
                 ntr);
    k = ntr;
  }
  Eigen::MatrixXd trb = tr_base, teb = te_base;
  zscore_by_train(trb, teb);
  Eigen::MatrixXd tre = tr_extra, tee = te_extra;
  zscore_by_train(tre, tee);

  const Eigen::VectorXd trb_sq = trb.rowwise().squaredNorm();
  const Eigen::VectorXd teb_sq = teb.rowwise().squaredNorm();
  Eigen::MatrixXd tr_pre(ntr, kext), te_pre(nte, kext);
  for (int c = 0; c < kext; ++c) {
    tr_pre.col(c) = tre.col(c).array().square();
    te_pre.col(c) = tee.col(c).array().square();
    if (c > 0) {
      tr_pre.col(c) += tr_pre.col(c - 1);
      te_pre.col(c) += te_pre.col(c - 1);
    }
  }

  Eigen::MatrixXd preds(nte, kext);
  RowMajorMatrix cross(std::min(kKnnTile, nte), ntr);
  KnnScratch scratch;
  scratch.dist.resize(ntr);
  for (int b = 0; b < nte; b += kKnnTile) {
    const int rows = std::min(kKnnTile, nte - b);
    for (int c = 0; c < kext; ++c) {
      if (c == 0)
        cross.topRows(rows).noalias() =
            teb.middleRows(b, rows) * trb.transpose();
      cross.topRows(rows).noalias() +=
          tee.middleRows(b, rows).col(c) * tre.col(c).transpose();
      for (int r = 0; r < rows; ++r) {
        const int i = b + r;
        const double base = teb_sq(i) + te_pre(i, c);
        for (int j = 0; j < ntr; ++j) {
          scratch.dist[j] = std::max(
              0.0, base + trb_sq(j) + tr_pre(j, c) - 2.0 * cross(r, j));
        }
        preds(i, c) = knn_mean_of_selected(scratch, k, train_y);
      }
    }
  }
  return preds;
}

}  // namespace

Eigen::VectorXd knn_regress(const Eigen::MatrixXd& train_x,
                            const Eigen::VectorXd& train_y,
                            const Eigen::MatrixXd& test_x, int k) {
  const int ntr = static_cast<int>(train_x.rows());
  const int nte = static_cast<int>(test_x.rows());
  const int dim = static_cast<int>(train_x.cols());
  if (ntr == 0) throw DataError("knn: no training rows");
  if (train_y.size() != ntr)
    throw DataError("knn: response length does not match training rows");
  if (test_x.cols() != dim)
    throw DataError("knn: train and test feature widths differ");
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (k > ntr) {
    std::fprintf(stderr, "knn: k=%d exceeds %d training rows, clipping\n", k,
                 ntr);
    k = ntr;
  }

  Eigen::MatrixXd tr = train_x, te = test_x;
  zscore_by_train(tr, te);
  const Eigen::VectorXd tr_sq = tr.rowwise().squaredNorm();
  const Eigen::VectorXd te_sq = te.rowwise().squaredNorm();

  Eigen::VectorXd pred(nte);
  RowMajorMatrix cross(std::min(kKnnTile, nte), ntr);
  KnnScratch scratch;
  scratch.dist.resize(ntr);
  for (int b = 0; b < nte; b += kKnnTile) {
    const int rows = std::min(kKnnTile, nte - b);
    cross.topRows(rows).noalias() = te.middleRows(b, rows) * tr.transpose();
    for (int r = 0; r < rows; ++r) {
      const int i = b + r;
      for (int j = 0; j < ntr; ++j) {
        scratch.dist[j] =
            std::max(0.0, te_sq(i) + tr_sq(j) - 2.0 * cross(r, j));
      }
      pred(i) = knn_mean_of_selected(scratch, k, train_y);
    }
  }
  return pred;
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() == 0)
    throw DataError("mse: length mismatch or empty input");
  return (pred - truth).squaredNorm() / pred.size();
}

double percent_improvement(double mse_method, double mse_onehot) {
  if (!(mse_onehot > 0.0))
    throw NumericError("percent improvement undefined for zero baseline MSE");
  return 100.0 * (mse_onehot - mse_method) / mse_onehot;
}

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DataError("paired t-test needs two equal-length samples, length >= 2");
  const int m = static_cast<int>(a.size());
  double mean = 0.0;
  for (int i = 0; i < m; ++i) mean += a[i] - b[i];
  mean /= m;
  double ss = 0.0;
  for (int i = 0; i < m; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult res;
  if (ss == 0.0) {
    if (mean == 0.0) return {0.0, 1.0};
    res.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    res.p = 0.0;
    return res;
  }
  const double sd = std::sqrt(ss / (m - 1));
  res.t = mean / (sd / std::sqrt(static_cast<double>(m)));
  res.p = student_t_two_sided_p(res.t, m - 1);
  return res;
}

MethodSpec parse_method_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string tag = text.substr(0, colon);
  MethodSpec spec;
  spec.method = enc_method_from_string(tag);
  spec.name = tag;
  if (colon == std::string::npos) return spec;

  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("method spec '" + text + "': expected key=value, got '" +
                        item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    auto as_double = [&]() {
      try {
        std::size_t used = 0;
        const double v = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("method spec '" + text + "': bad number '" + val + "'");
      }
    };
    auto as_int = [&]() {
      const double v = as_double();
      if (v != std::floor(v))
        throw ConfigError("method spec '" + text + "': '" + key +
                          "' must be an integer");
      return static_cast<int>(v);
    };
    const bool rank_based = spec.method == EncMethod::lowrank ||
                            spec.method == EncMethod::sparselowrank;
    if (key == "k") {
      if (!rank_based)
        throw ConfigError("method spec '" + text + "': 'k' only applies to "
                          "lowrank/sparselowrank");
      if (val == "cv")
        spec.cv_k = true;
      else
        spec.opts.k = as_int();
    } else if (key == "lambda") {
      if (spec.method != EncMethod::sparselowrank)
        throw ConfigError("method spec '" + text +
                          "': 'lambda' only applies to sparselowrank");
      spec.opts.lambda = as_double();
    } else if (key == "lambda1") {
      if (spec.method != EncMethod::sparselowrank)
        throw ConfigError("method spec '" + text +
                          "': 'lambda1' only applies to sparselowrank");
      spec.opts.lambda1 = as_double();
    } else if (key == "reg") {
      if (spec.method != EncMethod::mnl)
        throw ConfigError("method spec '" + text +
                          "': 'reg' only applies to mnl");
      spec.opts.reg = as_double();
    } else if (key == "copies") {
      if (spec.method != EncMethod::multiperm)
        throw ConfigError("method spec '" + text +
                          "': 'copies' only applies to multiperm");
      spec.opts.copies = as_int();
    } else if (key == "as") {
      if (val.empty())
        throw ConfigError("method spec '" + text + "': empty label");
      spec.name = val;
    } else {
      throw ConfigError("method spec '" + text + "': unknown key '" + key + "'");
    }
  }
  return spec;
}

namespace {

std::string method_spec_to_text(const MethodSpec& s) {
  std::string out = to_string(s.method);
  std::vector<std::string> kv;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  const EncoderOptions def;
  if (s.cv_k)
    kv.push_back("k=cv");
  else if (s.opts.k != def.k &&
           (s.method == EncMethod::lowrank ||
            s.method == EncMethod::sparselowrank))
    kv.push_back("k=" + std::to_string(s.opts.k));
  if (s.opts.lambda != def.lambda) kv.push_back("lambda=" + num(s.opts.lambda));
  if (s.opts.lambda1 != def.lambda1)
    kv.push_back("lambda1=" + num(s.opts.lambda1));
  if (s.opts.reg != def.reg) kv.push_back("reg=" + num(s.opts.reg));
  if (s.opts.copies != def.copies)
    kv.push_back("copies=" + std::to_string(s.opts.copies));
  if (s.name != to_string(s.method)) kv.push_back("as=" + s.name);
  for (std::size_t i = 0; i < kv.size(); ++i)
    out += (i == 0 ? ":" : ",") + kv[i];
  return out;
}

// Stream key from the method's identity (tag + parameters), never from its
// label or list position: identically parameterized entries must draw the
// same randomness so their results agree bit for bit.
std::uint64_t method_stream_key(const MethodSpec& s) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(s.method) + 1);
  h = mix64(h ^ static_cast<std::uint64_t>(s.opts.k));
  h = mix64(h ^ static_cast<std::uint64_t>(s.cv_k ? 1 : 0));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(s.opts.lambda));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(s.opts.lambda1));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(s.opts.reg));
  h = mix64(h ^ static_cast<std::uint64_t>(s.opts.copies));
  return h;
}

Eigen::MatrixXd with_encoding(const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& enc) {
  Eigen::MatrixXd out(x.rows(), x.cols() + enc.cols());
  out.leftCols(x.cols()) = x;
  out.rightCols(enc.cols()) = enc;
  return out;
}

int effective_knn_k(int configured, int n_train) {
  if (configured > 0) return configured;
  return std::max(1, static_cast<int>(std::lround(std::sqrt(
                         static_cast<double>(n_train)))));
}

struct CellOutcome {
  std::vector<double> fold_mse;
  std::string error;
};

struct SeedOutcome {
  std::vector<CellOutcome> cells;  // one per method
};

SeedOutcome eval_seed(const BenchConfig& cfg, const Dataset* csv_data, int s) {
  const std::uint64_t seed_base = derive_seed(cfg.master_seed, s);
  Dataset generated;
  const Dataset* data = csv_data;
  if (cfg.source.use_sim) {
    SimConfig sim = cfg.source.sim;
    sim.seed = derive_seed(seed_base, 1);
    generated = simulate(sim).dataset;
    data = &generated;
  }

  Rng fold_rng(derive_seed(seed_base, 2));
  const FoldPlan plan = stratified_kfold(data->g, cfg.folds, fold_rng);
  std::vector<std::vector<int>> test_rows(cfg.folds), train_rows(cfg.folds);
  for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
    for (int f = 0; f < cfg.folds; ++f) {
      if (plan.assignment[i] == f)
        test_rows[f].push_back(static_cast<int>(i));
      else
        train_rows[f].push_back(static_cast<int>(i));
    }
  }
  const std::uint64_t method_base = derive_seed(seed_base, 3);

  SeedOutcome out;
  out.cells.resize(cfg.methods.size());
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const MethodSpec& spec = cfg.methods[mi];
    CellOutcome& cell = out.cells[mi];
    const std::uint64_t enc_stream =
        derive_seed(method_base, method_stream_key(spec));
    try {
      for (int f = 0; f < cfg.folds; ++f) {
        if (test_rows[f].empty())
          throw DataError("fold " + std::to_string(f) +
                          " has no test rows; all categories are too small");
        const Dataset train = split_rows(*data, train_rows[f]);
        const Dataset test = split_rows(*data, test_rows[f]);

        EncoderOptions opts = spec.opts;
        opts.seed = derive_seed(enc_stream, f);
        if (spec.cv_k)
          opts.k = select_k_by_cv(train, spec.method, cfg.inner_folds,
                                  cfg.knn_k, opts,
                                  derive_seed(enc_stream, 1000 + f));
        const FittedEncoder enc = fit_encoder(spec.method, train, opts);
        const Eigen::MatrixXd train_f =
            with_encoding(train.x, transform(enc, train).s);
        const Eigen::MatrixXd test_f =
            with_encoding(test.x, transform(enc, test).s);
        const int k = effective_knn_k(cfg.knn_k, train.n());
        const Eigen::VectorXd pred = knn_regress(train_f, *train.y, test_f, k);
        cell.fold_mse.push_back(mse(pred, *test.y));
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }
  return out;
}

}  // namespace

int select_k_by_cv(const Dataset& d, EncMethod scheme, int folds, int knn_k,
                   const EncoderOptions& opts, std::uint64_t seed) {
  if (scheme != EncMethod::lowrank && scheme != EncMethod::sparselowrank)
    throw ConfigError("select_k_by_cv only applies to lowrank/sparselowrank");
  if (!d.y) throw ConfigError("select_k_by_cv needs a response column");
  const int kmax = std::min(d.m(), d.p());

  Rng rng(seed);
  const FoldPlan plan = stratified_kfold(d.g, folds, rng);
  std::vector<double> score(kmax + 1, 0.0);
  std::vector<int> evals(kmax + 1, 0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, te;
    for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
      if (plan.assignment[i] == f)
        te.push_back(static_cast<int>(i));
      else
        tr.push_back(static_cast<int>(i));
    }
    if (te.empty()) continue;
    const Dataset train = split_rows(d, tr);
    const Dataset test = split_rows(d, te);
    const int k_learn = effective_knn_k(knn_k, train.n());

    if (scheme == EncMethod::lowrank) {
      // Rank-k candidates are the first k columns of one full-rank fit, so
      // every candidate shares a single fit and a single distance pass.
      FittedEncoder full = fit_lowrank(train, kmax);
      full.unseen = opts.unseen;
      const Eigen::MatrixXd preds =
          knn_prefix_predictions(train.x, transform(full, train).s, *train.y,
                                 test.x, transform(full, test).s, k_learn);
      for (int k = 1; k <= kmax; ++k) {
        score[k] += mse(preds.col(k - 1), *test.y);
        ++evals[k];
      }
      continue;
    }
    // Sparse loadings are not nested across k, so each candidate re-fits.
    for (int k = 1; k <= kmax; ++k) {
      FittedEncoder enc = fit_sparse_lowrank(train, k, opts.lambda,
                                             opts.lambda1);
      enc.unseen = opts.unseen;
      const Eigen::MatrixXd train_f =
          with_encoding(train.x, transform(enc, train).s);
      const Eigen::MatrixXd test_f =
          with_encoding(test.x, transform(enc, test).s);
      const Eigen::VectorXd pred =
          knn_regress(train_f, *train.y, test_f, k_learn);
      score[k] += mse(pred, *test.y);
      ++evals[k];
    }
  }
  int best = 1;
  for (int k = 1; k <= kmax; ++k) {
    if (evals[k] == 0) throw DataError("select_k_by_cv: no usable folds");
    if (score[k] / evals[k] < score[best] / evals[best]) best = k;
  }
  return best;
}

BenchConfig bench_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("benchmark config is not valid JSON: ") +
                      e.what());
  }
  BenchConfig cfg;
  for (const auto& [key, val] : j.items()) {
    if (key == "source" || key == "methods" || key == "folds" ||
        key == "seeds" || key == "master_seed" || key == "knn_k" ||
        key == "inner_folds" || key == "threads")
      continue;
    throw ConfigError("benchmark config: unknown key '" + key + "'");
  }
  try {
    const nlohmann::json& src = j.at("source");
    const std::string type = src.at("type").get<std::string>();
    if (type == "simulate") {
      cfg.source.use_sim = true;
      cfg.source.sim.n = src.at("n").get<int>();
      cfg.source.sim.num_latent = src.at("latent").get<int>();
      cfg.source.sim.num_groups = src.at("groups").get<int>();
      cfg.source.sim.p = src.at("p").get<int>();
      if (src.contains("p_assign"))
        cfg.source.sim.p_assign = src.at("p_assign").get<double>();
      cfg.source.sim.setup =
          sim_setup_from_string(src.at("setup").get<std::string>());
    } else if (type == "csv") {
      cfg.source.csv_path = src.at("path").get<std::string>();
      cfg.source.schema_path = src.at("schema").get<std::string>();
    } else {
      throw ConfigError("benchmark config: source type must be simulate or csv");
    }
    for (const auto& mtext : j.at("methods"))
      cfg.methods.push_back(parse_method_spec(mtext.get<std::string>()));
    if (j.contains("folds")) cfg.folds = j.at("folds").get<int>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<int>();
    if (j.contains("master_seed"))
      cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("knn_k")) cfg.knn_k = j.at("knn_k").get<int>();
    if (j.contains("inner_folds"))
      cfg.inner_folds = j.at("inner_folds").get<int>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("benchmark config is malformed: ") + e.what());
  }
  return cfg;
}

std::string bench_config_to_json(const BenchConfig& cfg) {
  nlohmann::json j;
  if (cfg.source.use_sim) {
    j["source"] = {{"type", "simulate"},
                   {"n", cfg.source.sim.n},
                   {"latent", cfg.source.sim.num_latent},
                   {"groups", cfg.source.sim.num_groups},
                   {"p", cfg.source.sim.p},
                   {"p_assign", cfg.source.sim.p_assign},
                   {"setup", to_string(cfg.source.sim.setup)}};
  } else {
    j["source"] = {{"type", "csv"},
                   {"path", cfg.source.csv_path},
                   {"schema", cfg.source.schema_path}};
  }
  std::vector<std::string> methods;
  for (const MethodSpec& m : cfg.methods)
    methods.push_back(method_spec_to_text(m));
  j["methods"] = methods;
  j["folds"] = cfg.folds;
  j["seeds"] = cfg.seeds;
  j["master_seed"] = cfg.master_seed;
  j["knn_k"] = cfg.knn_k;
  j["inner_folds"] = cfg.inner_folds;
  j["threads"] = cfg.threads;
  return j.dump(2);
}

BenchReport run_benchmark(const BenchConfig& cfg) {
  if (cfg.methods.empty())
    throw ConfigError("benchmark config lists no methods");
  if (cfg.folds < 2) throw ConfigError("benchmark needs >= 2 folds");
  if (cfg.seeds < 1) throw ConfigError("benchmark needs >= 1 seed");
  if (cfg.knn_k < 0) throw ConfigError("knn_k must be >= 0 (0 = sqrt rule)");
  if (cfg.inner_folds < 2) throw ConfigError("inner_folds must be >= 2");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");

  int baseline = -1;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    if (cfg.methods[mi].method == EncMethod::onehot) {
      baseline = static_cast<int>(mi);
      break;
    }
  if (baseline < 0)
    throw ConfigError("benchmark needs a onehot entry as the comparison baseline");

  Dataset csv_data;
  const Dataset* csv_ptr = nullptr;
  if (!cfg.source.use_sim) {
    const ColumnSchema schema = ColumnSchema::from_file(cfg.source.schema_path);
    csv_data = load_csv(cfg.source.csv_path, schema);
    if (!csv_data.y)
      throw ConfigError("benchmark data has no response column");
    csv_ptr = &csv_data;
  }

  // Seed evaluations are independent; results land in seed-index slots so
  // the aggregate never depends on scheduling order.
  std::vector<SeedOutcome> per_seed(cfg.seeds);
  const int workers = std::min(cfg.threads, cfg.seeds);
  if (workers <= 1) {
    for (int s = 0; s < cfg.seeds; ++s)
      per_seed[s] = eval_seed(cfg, csv_ptr, s);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (int s = next.fetch_add(1); s < cfg.seeds; s = next.fetch_add(1))
          per_seed[s] = eval_seed(cfg, csv_ptr, s);
      });
    for (std::thread& t : pool) t.join();
  }

  BenchReport report;
  report.config = cfg;
  report.methods.resize(cfg.methods.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    MethodResult& res = report.methods[mi];
    res.name = cfg.methods[mi].name;
    for (int s = 0; s < cfg.seeds; ++s) {
      const CellOutcome& cell = per_seed[s].cells[mi];
      if (!cell.error.empty() && res.error.empty())
        res.error = "seed " + std::to_string(s) + ": " + cell.error;
      res.per_fold_mse.push_back(cell.fold_mse);
      if (static_cast<int>(cell.fold_mse.size()) == cfg.folds) {
        const double seed_mse =
            std::accumulate(cell.fold_mse.begin(), cell.fold_mse.end(), 0.0) /
            cfg.folds;
        res.per_seed_mse.push_back(seed_mse);
      }
    }
    if (res.error.empty() &&
        static_cast<int>(res.per_seed_mse.size()) == cfg.seeds) {
      res.mean_mse =
          std::accumulate(res.per_seed_mse.begin(), res.per_seed_mse.end(),
                          0.0) /
          cfg.seeds;
    } else {
      res.mean_mse = nan;
      if (res.error.empty()) res.error = "incomplete evaluation";
    }
  }

  // Comparisons against the one-hot entry. The paired test uses seeds as the
  // pairing unit when several are available, otherwise the single seed's
  // folds.
  const MethodResult& base = report.methods[baseline];
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    MethodResult& res = report.methods[mi];
    if (!res.error.empty() || !base.error.empty()) {
      res.pct_improvement = nan;
      res.t_stat = nan;
      res.p_value = nan;
      continue;
    }
    res.pct_improvement = percent_improvement(res.mean_mse, base.mean_mse);
    if (static_cast<int>(mi) == baseline) {
      res.t_stat = 0.0;
      res.p_value = 1.0;
      continue;
    }
    const std::vector<double>& a =
        cfg.seeds >= 2 ? res.per_seed_mse : res.per_fold_mse[0];
    const std::vector<double>& b =
        cfg.seeds >= 2 ? base.per_seed_mse : base.per_fold_mse[0];
    const TTestResult t = paired_t_test(a, b);
    res.t_stat = t.t;
    res.p_value = t.p;
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace

std::string report_to_csv(const BenchReport& r) {
  std::string out = "method,mean_mse,pct_improvement,t_vs_onehot,p_value,error\n";
  for (const MethodResult& m : r.methods) {
    out += m.name + "," + fmt(m.mean_mse) + "," + fmt(m.pct_improvement) +
           "," + fmt(m.t_stat) + "," + fmt(m.p_value) + "," + m.error + "\n";
  }
  return out;
}

std::string report_to_json(const BenchReport& r) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(bench_config_to_json(r.config));
  j["methods"] = nlohmann::json::array();
  for (const MethodResult& m : r.methods) {
    nlohmann::json e;
    e["name"] = m.name;
    e["mean_mse"] = fmt(m.mean_mse);
    e["pct_improvement"] = fmt(m.pct_improvement);
    e["t_vs_onehot"] = fmt(m.t_stat);
    e["p_value"] = fmt(m.p_value);
    std::vector<std::string> seeds;
    for (double v : m.per_seed_mse) seeds.push_back(fmt(v));
    e["per_seed_mse"] = seeds;
    std::vector<std::vector<std::string>> folds;
    for (const auto& fs : m.per_fold_mse) {
      std::vector<std::string> row;
      for (double v : fs) row.push_back(fmt(v));
      folds.push_back(row);
    }
    e["per_fold_mse"] = folds;
    if (!m.error.empty()) e["error"] = m.error;
    j["methods"].push_back(e);
  }
  return j.dump(2) + "\n";
}

}  // namespace catenc
