#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <vector>

#include "catenc/bench.h"
#include "catenc/dataset.h"
#include "catenc/errors.h"
#include "catenc/rng.h"
#include "catenc/simulate.h"
#include "doctest.h"
#include "exact.h"

using namespace catenc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("catenc_bench_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Plain z-score + full sort reference for the k-NN regressor.
Eigen::VectorXd knn_oracle(const Eigen::MatrixXd& train_x,
                           const Eigen::VectorXd& train_y,
                           const Eigen::MatrixXd& test_x, int k) {
  const int ntr = static_cast<int>(train_x.rows());
  const int p = static_cast<int>(train_x.cols());
  k = std::min(k, ntr);

  Eigen::RowVectorXd mean = train_x.colwise().mean();
  Eigen::RowVectorXd sd(p);
  std::vector<bool> keep(p);
  for (int j = 0; j < p; ++j) {
    const double var =
        (train_x.col(j).array() - mean(j)).square().sum() / ntr;
    keep[j] = var > 1e-28 * (mean(j) * mean(j) + 1.0);
    sd(j) = keep[j] ? std::sqrt(var) : 1.0;
  }
  auto zscore = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd z = (m.rowwise() - mean).array().rowwise() / sd.array();
    for (int j = 0; j < p; ++j)
      if (!keep[j]) z.col(j).setZero();
    return z;
  };
  Eigen::MatrixXd ztr = zscore(train_x);
  Eigen::MatrixXd zte = zscore(test_x);

  Eigen::VectorXd pred(test_x.rows());
  for (int i = 0; i < test_x.rows(); ++i) {
    std::vector<std::pair<double, int>> dist(ntr);
    for (int t = 0; t < ntr; ++t)
      dist[t] = {(zte.row(i) - ztr.row(t)).squaredNorm(), t};
    std::sort(dist.begin(), dist.end());
    double acc = 0.0;
    for (int t = 0; t < k; ++t) acc += train_y(dist[t].second);
    pred(i) = acc / k;
  }
  return pred;
}

const char* kSimConfigJson = R"({
  "source": {"type": "simulate", "n": 300, "latent": 2, "groups": 6, "p": 3,
             "setup": "latent_linear"},
  "methods": ["onehot", "means", "means:as=m2"],
  "folds": 3,
  "seeds": 2,
  "master_seed": 5
})";

}  // namespace

TEST_CASE("stratified folds partition each category evenly") {
  // category sizes 8, 5, 1 with 4 folds
  std::vector<int> g;
  for (int i = 0; i < 8; ++i) g.push_back(0);
  for (int i = 0; i < 5; ++i) g.push_back(1);
  g.push_back(2);
  Rng rng(701);
  FoldPlan plan = stratified_kfold(g, 4, rng);
  REQUIRE(plan.assignment.size() == g.size());

  std::vector<std::vector<int>> per_cat_fold(3, std::vector<int>(4, 0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int f = plan.assignment[i];
    if (g[i] == 2) {
      CHECK(f == -1);  // too small to stratify, stays in training
    } else {
      REQUIRE(f >= 0);
      REQUIRE(f < 4);
      ++per_cat_fold[g[i]][f];
    }
  }
  for (int f = 0; f < 4; ++f) CHECK(per_cat_fold[0][f] == 2);
  // five rows over four folds: counts differ by at most one
  for (int f = 0; f < 4; ++f) {
    CHECK(per_cat_fold[1][f] >= 1);
    CHECK(per_cat_fold[1][f] <= 2);
  }

  CHECK_THROWS_AS(stratified_kfold(g, 1, rng), ConfigError);
}

TEST_CASE("folds never put an unseen category into a test split") {
  Rng meta(702);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(meta.below(29));
    const int n = 30 + static_cast<int>(meta.below(371));
    std::vector<int> g(n);
    for (int i = 0; i < n; ++i) g[i] = static_cast<int>(meta.below(m));
    Rng rng(meta.next_u64());
    FoldPlan plan = stratified_kfold(g, 4, rng);

    for (int f = 0; f < 4; ++f) {
      std::set<int> test_cats, train_cats;
      for (int i = 0; i < n; ++i)
        (plan.assignment[i] == f ? test_cats : train_cats).insert(g[i]);
      for (int c : test_cats) CHECK(train_cats.count(c) == 1);
    }
  }
}

TEST_CASE("fold plans depend only on the seed") {
  std::vector<int> g(50);
  for (int i = 0; i < 50; ++i) g[i] = i % 5;
  Rng a(703), b(703), c(703), d(704);
  CHECK(stratified_kfold(g, 4, a).assignment ==
        stratified_kfold(g, 4, b).assignment);
  CHECK(stratified_kfold(g, 4, c).assignment !=
        stratified_kfold(g, 4, d).assignment);
}

TEST_CASE("knn matches the exhaustive oracle") {
  Eigen::MatrixXd train_x = random_matrix(30, 4, 704);
  Eigen::VectorXd train_y = random_matrix(30, 1, 705);
  Eigen::MatrixXd test_x = random_matrix(12, 4, 706);
  for (int k : {1, 3, 5, 30}) {
    Eigen::VectorXd got = knn_regress(train_x, train_y, test_x, k);
    Eigen::VectorXd want = knn_oracle(train_x, train_y, test_x, k);
    INFO("k=", k);
    CHECK(bitwise_equal(got, want));
  }
}

TEST_CASE("knn basics") {
  Eigen::MatrixXd train_x(4, 1);
  train_x << 0, 1, 2, 3;
  Eigen::VectorXd train_y(4);
  train_y << 10, 20, 30, 40;

  // k = 1 on an exact match returns that row's response
  Eigen::MatrixXd probe(1, 1);
  probe << 2;
  CHECK(knn_regress(train_x, train_y, probe, 1)(0) == 30.0);

  // k larger than the training set is clipped to it
  CHECK(knn_regress(train_x, train_y, probe, 50)(0) == 25.0);

  // constant response predicts itself
  Eigen::VectorXd const_y = Eigen::VectorXd::Constant(4, 7.0);
  CHECK(knn_regress(train_x, const_y, probe, 3)(0) == 7.0);

  CHECK_THROWS_AS(knn_regress(train_x, train_y, probe, 0), ConfigError);
  Eigen::MatrixXd wide(1, 2);
  wide << 1, 2;
  CHECK_THROWS_AS(knn_regress(train_x, train_y, wide, 1), DataError);
}

TEST_CASE("knn is invariant to affine feature rescaling") {
  Eigen::MatrixXd train_x = random_matrix(40, 3, 707);
  Eigen::VectorXd train_y = random_matrix(40, 1, 708);
  Eigen::MatrixXd test_x = random_matrix(15, 3, 709);

  Eigen::MatrixXd train_s = train_x;
  Eigen::MatrixXd test_s = test_x;
  train_s.col(1) = train_x.col(1) * 17.0;
  test_s.col(1) = test_x.col(1) * 17.0;
  train_s.col(2) = train_x.col(2).array() + 5.0;
  test_s.col(2) = test_x.col(2).array() + 5.0;

  Eigen::VectorXd a = knn_regress(train_x, train_y, test_x, 5);
  Eigen::VectorXd b = knn_regress(train_s, train_y, test_s, 5);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("knn ignores training-constant columns") {
  Eigen::MatrixXd train_x = random_matrix(25, 3, 710);
  Eigen::VectorXd train_y = random_matrix(25, 1, 711);
  Eigen::MatrixXd test_x = random_matrix(10, 3, 712);

  Eigen::MatrixXd train_c(25, 4);
  train_c << train_x, Eigen::VectorXd::Constant(25, 0.1);
  Eigen::MatrixXd test_c(10, 4);
  test_c << test_x, random_matrix(10, 1, 713);  // varies in the test rows

  Eigen::VectorXd without = knn_regress(train_x, train_y, test_x, 4);
  Eigen::VectorXd with_c = knn_regress(train_c, train_y, test_c, 4);
  CHECK(bitwise_equal(without, with_c));
}

TEST_CASE("mse and percent improvement arithmetic") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 1, 4, 0;
  CHECK(mse(a, b) == doctest::Approx((0.0 + 4.0 + 9.0) / 3).epsilon(1e-15));

  CHECK(percent_improvement(0.8, 1.0) == doctest::Approx(20.0));
  CHECK(percent_improvement(1.32, 1.0) == doctest::Approx(-32.0));
  CHECK(percent_improvement(1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(percent_improvement(0.5, 0.0), NumericError);

  Eigen::VectorXd short_v(2);
  short_v << 1, 2;
  CHECK_THROWS_AS(mse(a, short_v), DataError);
}

TEST_CASE("paired t-test matches the frozen reference") {
  // differences 1, 2, 3
  TTestResult r = paired_t_test({2, 3, 4}, {1, 1, 1});
  CHECK(std::fabs(r.t - 3.4641016151377539) <= 1e-9);
  CHECK(std::fabs(r.p - 0.074179900227448553) <= 1e-9);

  // swapping the arguments flips the statistic, not the p-value
  TTestResult s = paired_t_test({1, 1, 1}, {2, 3, 4});
  CHECK(std::fabs(s.t + r.t) <= 1e-12);
  CHECK(std::fabs(s.p - r.p) <= 1e-15);

  // identical samples degenerate to (0, 1)
  TTestResult z = paired_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(z.t == 0.0);
  CHECK(z.p == 1.0);

  // constant nonzero difference: infinite statistic, zero p
  TTestResult inf = paired_t_test({2, 3, 4}, {1, 2, 3});
  CHECK(std::isinf(inf.t));
  CHECK(inf.t > 0);
  CHECK(inf.p == 0.0);

  CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), DataError);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {1, 2, 3}), DataError);
}

TEST_CASE("method spec grammar") {
  MethodSpec plain = parse_method_spec("onehot");
  CHECK(plain.method == EncMethod::onehot);
  CHECK(plain.name == "onehot");
  CHECK(!plain.cv_k);

  MethodSpec cv = parse_method_spec("lowrank:k=cv");
  CHECK(cv.method == EncMethod::lowrank);
  CHECK(cv.cv_k);

  MethodSpec fixed = parse_method_spec("lowrank:k=3");
  CHECK(fixed.opts.k == 3);
  CHECK(!fixed.cv_k);

  MethodSpec sparse =
      parse_method_spec("sparselowrank:k=2,lambda=0.5,lambda1=0.125");
  CHECK(sparse.opts.k == 2);
  CHECK(sparse.opts.lambda == 0.5);
  CHECK(sparse.opts.lambda1 == 0.125);

  MethodSpec mnl = parse_method_spec("mnl:reg=0.001");
  CHECK(mnl.opts.reg == 0.001);

  MethodSpec multi = parse_method_spec("multiperm:copies=6");
  CHECK(multi.opts.copies == 6);

  MethodSpec labeled = parse_method_spec("means:as=baseline_means");
  CHECK(labeled.method == EncMethod::means);
  CHECK(labeled.name == "baseline_means");

  CHECK_THROWS_AS(parse_method_spec("wat"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("onehot:k=2"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("lowrank:k=abc"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("lowrank:zzz=3"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("means:lambda=0.1"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("mnl:copies=2"), ConfigError);
  CHECK_THROWS_AS(parse_method_spec("lowrank:k="), ConfigError);
}

TEST_CASE("config json round trip") {
  BenchConfig cfg = bench_config_from_json(kSimConfigJson);
  CHECK(cfg.source.use_sim);
  CHECK(cfg.source.sim.n == 300);
  CHECK(cfg.source.sim.setup == SimSetup::latent_linear);
  CHECK(cfg.methods.size() == 3);
  CHECK(cfg.methods[2].name == "m2");
  CHECK(cfg.folds == 3);
  CHECK(cfg.seeds == 2);
  CHECK(cfg.master_seed == 5);

  BenchConfig back = bench_config_from_json(bench_config_to_json(cfg));
  CHECK(bench_config_to_json(back) == bench_config_to_json(cfg));

  CHECK_THROWS_AS(bench_config_from_json("{"), ConfigError);
  CHECK_THROWS_AS(bench_config_from_json(R"({"methods": ["onehot"]})"),
                  ConfigError);  // no source
  CHECK_THROWS_AS(
      bench_config_from_json(
          R"({"source": {"type": "simulate", "n": 10, "latent": 1,
              "groups": 2, "p": 3}, "methods": ["onehot"], "zzz": 1})"),
      ConfigError);  // unknown key
  CHECK_THROWS_AS(
      bench_config_from_json(
          R"({"source": {"type": "teapot"}, "methods": ["onehot"]})"),
      ConfigError);
}

TEST_CASE("select_k_by_cv finds a small k on near-rank-1 structure") {
  Rng rng(714);
  const int m = 10, p = 5, per = 12;
  Eigen::VectorXd v(p);
  v << 1, 0.5, -0.5, 0.25, 1;
  v.normalize();
  const int n = m * per;
  Eigen::MatrixXd x(n, p);
  std::vector<int> g(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    g[i] = i % m;
    const double c = g[i] - (m - 1) / 2.0;
    for (int j = 0; j < p; ++j) x(i, j) = c * v(j) + 0.05 * rng.normal();
    y(i) = c + 0.1 * rng.normal();
  }
  std::vector<std::string> names;
  for (int l = 0; l < m; ++l) names.push_back("c" + std::to_string(l));
  Dataset d = make_dataset(x, g, y, names);

  EncoderOptions opts;
  const int k = select_k_by_cv(d, EncMethod::lowrank, 4, 3, opts, 9);
  CHECK(k >= 1);
  CHECK(k <= 2);
  // deterministic under the same seed
  CHECK(select_k_by_cv(d, EncMethod::lowrank, 4, 3, opts, 9) == k);

  CHECK_THROWS_AS(select_k_by_cv(d, EncMethod::means, 4, 3, opts, 9),
                  ConfigError);
}

TEST_CASE("benchmark runs are deterministic and duplicates coincide") {
  BenchConfig cfg = bench_config_from_json(kSimConfigJson);
  BenchReport r1 = run_benchmark(cfg);
  BenchReport r2 = run_benchmark(cfg);
  CHECK(report_to_csv(r1) == report_to_csv(r2));
  CHECK(report_to_json(r1) == report_to_json(r2));

  REQUIRE(r1.methods.size() == 3);
  CHECK(r1.methods[0].name == "onehot");
  CHECK(r1.methods[1].name == "means");
  CHECK(r1.methods[2].name == "m2");
  // identically-parameterized entries give bitwise-identical numbers
  CHECK(r1.methods[1].per_seed_mse == r1.methods[2].per_seed_mse);
  CHECK(r1.methods[1].per_fold_mse == r1.methods[2].per_fold_mse);

  for (const MethodResult& m : r1.methods) {
    CHECK(m.error.empty());
    CHECK(std::isfinite(m.mean_mse));
    REQUIRE(m.per_seed_mse.size() == 2);
    REQUIRE(m.per_fold_mse.size() == 2);
    for (const auto& folds : m.per_fold_mse) CHECK(folds.size() == 3);
    // the per-seed mse is the plain average of its fold mses
    for (int s = 0; s < 2; ++s) {
      double mean = 0;
      for (double f : m.per_fold_mse[s]) mean += f;
      mean /= 3;
      CHECK(std::fabs(mean - m.per_seed_mse[s]) <= 1e-12);
    }
  }
  // baseline self-comparison is the identity
  CHECK(r1.methods[0].pct_improvement == 0.0);
  CHECK(r1.methods[0].t_stat == 0.0);
  CHECK(r1.methods[0].p_value == 1.0);
}

TEST_CASE("thread count changes nothing but the config echo") {
  BenchConfig cfg = bench_config_from_json(kSimConfigJson);
  cfg.seeds = 3;
  BenchReport serial = run_benchmark(cfg);
  cfg.threads = 3;
  BenchReport parallel = run_benchmark(cfg);
  REQUIRE(serial.methods.size() == parallel.methods.size());
  for (std::size_t i = 0; i < serial.methods.size(); ++i) {
    CHECK(serial.methods[i].per_seed_mse == parallel.methods[i].per_seed_mse);
    CHECK(serial.methods[i].per_fold_mse == parallel.methods[i].per_fold_mse);
    CHECK(serial.methods[i].t_stat == parallel.methods[i].t_stat);
  }
}

TEST_CASE("csv-backed benchmarks work and repeat") {
  SimConfig sim;
  sim.n = 240;
  sim.num_latent = 2;
  sim.num_groups = 8;
  sim.p = 3;
  sim.setup = SimSetup::latent_linear;
  sim.seed = 77;
  SimOutput out = simulate(sim);
  fs::path csv = temp_dir() / "bench_data.csv";
  write_csv(out.dataset, csv.string());
  fs::path schema = temp_dir() / "bench_schema.json";
  {
    std::ofstream s(schema);
    s << R"({"columns": {"x1": "covariate", "x2": "covariate",
            "x3": "covariate", "g": "category", "y": "response"}})";
  }

  const std::string cfg_text = std::string(R"({
    "source": {"type": "csv", "path": ")") + csv.string() +
      R"(", "schema": ")" + schema.string() + R"("},
    "methods": ["onehot", "means", "lowrank:k=2"],
    "folds": 3, "seeds": 2, "master_seed": 3
  })";
  BenchConfig cfg = bench_config_from_json(cfg_text);
  CHECK(!cfg.source.use_sim);
  BenchReport r1 = run_benchmark(cfg);
  BenchReport r2 = run_benchmark(cfg);
  CHECK(report_to_json(r1) == report_to_json(r2));
  for (const MethodResult& m : r1.methods) {
    CHECK(m.error.empty());
    CHECK(std::isfinite(m.mean_mse));
  }
}

TEST_CASE("benchmark validation and per-method error capture") {
  BenchConfig cfg = bench_config_from_json(kSimConfigJson);
  cfg.methods.erase(cfg.methods.begin());  // drop onehot
  CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);

  cfg = bench_config_from_json(kSimConfigJson);
  cfg.folds = 1;
  CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);

  // an infeasible method parameter is reported in its cell, not thrown
  cfg = bench_config_from_json(kSimConfigJson);
  cfg.methods.push_back(parse_method_spec("lowrank:k=50"));
  BenchReport r = run_benchmark(cfg);
  REQUIRE(r.methods.size() == 4);
  CHECK(!r.methods[3].error.empty());
  CHECK(std::isnan(r.methods[3].mean_mse));
  CHECK(r.methods[0].error.empty());  // others unaffected

  const std::string csv_text = report_to_csv(r);
  CHECK(csv_text.find("nan") != std::string::npos);
}
