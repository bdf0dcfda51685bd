#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "catenc/dataset.h"
#include "catenc/encoders.h"
#include "catenc/rng.h"
#include "catenc/simulate.h"

namespace catenc {

// Per-row fold index; -1 marks rows of categories too small to stratify,
// which stay in every training fold and never reach a test fold.
struct FoldPlan {
  int folds = 0;
  std::vector<int> assignment;
};

// Rows of each category are shuffled and dealt round-robin, so every
// category with count >= folds appears in every fold.
FoldPlan stratified_kfold(const std::vector<int>& g, int folds, Rng& rng);

// Brute-force k-NN regression. Features are z-scored with training
// statistics (training-constant columns go to 0); squared Euclidean
// distances, ties broken by training row index. k is clipped to the number
// of training rows with a warning on stderr.
Eigen::VectorXd knn_regress(const Eigen::MatrixXd& train_x,
                            const Eigen::VectorXd& train_y,
                            const Eigen::MatrixXd& test_x, int k);

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// 100 * (mse_onehot - mse_method) / mse_onehot.
double percent_improvement(double mse_method, double mse_onehot);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Paired two-sided t-test on a - b. Zero-variance differences degenerate to
// (0, 1) for a zero mean and (+-inf, 0) otherwise.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

struct MethodSpec {
  std::string name;  // report label; defaults to the method tag
  EncMethod method = EncMethod::onehot;
  EncoderOptions opts;
  bool cv_k = false;  // lowrank/sparselowrank: pick k by inner CV
};

// "name[:key=value,...]" with keys k (int or "cv"), lambda, lambda1, reg,
// copies. Example: "lowrank:k=cv", "sparselowrank:k=2,lambda1=0.1".
MethodSpec parse_method_spec(const std::string& text);

struct BenchSource {
  bool use_sim = false;
  SimConfig sim;            // seed field is overridden per bench seed
  std::string csv_path;
  std::string schema_path;
};

struct BenchConfig {
  BenchSource source;
  std::vector<MethodSpec> methods;
  int folds = 4;
  int seeds = 1;
  std::uint64_t master_seed = 1;
  int knn_k = 0;        // 0 = round(sqrt(n_train))
  int inner_folds = 4;  // inner CV folds for cv_k selection
  int threads = 1;
};

BenchConfig bench_config_from_json(const std::string& text);
std::string bench_config_to_json(const BenchConfig& cfg);

struct MethodResult {
  std::string name;
  double mean_mse = 0.0;
  double pct_improvement = 0.0;  // vs the onehot entry; 0 for onehot itself
  double t_stat = 0.0;           // paired vs onehot
  double p_value = 1.0;
  std::vector<double> per_seed_mse;               // seeds
  std::vector<std::vector<double>> per_fold_mse;  // seeds x folds
  std::string error;  // non-empty if the method failed somewhere
};

struct BenchReport {
  BenchConfig config;
  std::vector<MethodResult> methods;
};

// Full protocol: per seed, build the data and a stratified fold plan; per
// fold, fit every encoder on the training rows only, replace the category
// column by the encoding on both splits, run k-NN, score test MSE.
// Deterministic for a fixed config, including under threads > 1.
BenchReport run_benchmark(const BenchConfig& cfg);

std::string report_to_csv(const BenchReport& r);
std::string report_to_json(const BenchReport& r);

// Smallest k in {1..min(M,p)} minimizing mean out-of-fold MSE of the k-NN
// learner on the encoded features; ties go to the smaller k.
int select_k_by_cv(const Dataset& d, EncMethod scheme, int folds, int knn_k,
                   const EncoderOptions& opts, std::uint64_t seed);

}  // namespace catenc
