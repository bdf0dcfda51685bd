#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "catenc/dataset.h"
#include "catenc/linalg.h"
#include "catenc/mnl.h"
#include "catenc/spca.h"

namespace catenc {

enum class EncMethod {
  onehot,
  deviation,
  difference,
  helmert,
  repeated,
  permutation,
  multiperm,
  fisher,
  means,
  lowrank,
  sparselowrank,
  mnl,
};

EncMethod enc_method_from_string(const std::string& s);
std::string to_string(EncMethod m);
bool is_contrast(EncMethod m);  // onehot/deviation/difference/helmert/repeated
bool is_integer(EncMethod m);   // permutation/multiperm/fisher

// What transform does with a category never seen at fit time.
enum class UnseenPolicy { error, fallback };

// Per-category covariate means: omega column g is the mean of x over rows
// with G = g.
struct GroupMeans {
  Eigen::MatrixXd omega;    // p x M
  std::vector<int> counts;  // M, all >= 1 at fit time
};

GroupMeans group_averages(const Eigen::MatrixXd& x, const std::vector<int>& g,
                          int m_levels,
                          const std::vector<std::string>* level_names = nullptr);
GroupMeans group_averages(const Dataset& d);

struct EncoderOptions {
  int k = 1;                  // lowrank / sparselowrank target dimension
  double lambda = 0.0;        // sparselowrank ridge weight
  double lambda1 = 0.0;       // sparselowrank L1 weight
  double reg = 1e-8;          // mnl ridge
  int copies = 4;             // multiperm mappings
  std::uint64_t seed = 0;     // permutation / multiperm draws
  UnseenPolicy unseen = UnseenPolicy::fallback;
};

// A fitted encoding model. Only the fields of the active method are
// populated; everything references training data alone.
struct FittedEncoder {
  EncMethod method = EncMethod::onehot;
  int output_dim = 0;
  UnseenPolicy unseen = UnseenPolicy::fallback;
  std::vector<std::string> level_names;  // training catalog

  Eigen::MatrixXd table;        // contrast table or integer mapping, M x dim
  GroupMeans means;             // means
  Eigen::VectorXd global_mean;  // means fallback row
  SvdFactors factors;           // lowrank
  int k = 0;                    // lowrank / sparselowrank
  SpcaFactors spca;             // sparselowrank
  Eigen::MatrixXd z;            // sparselowrank scores, M x k
  MnlModel mnl;                 // mnl
};

struct EncodingMatrix {
  Eigen::MatrixXd s;  // n x output_dim
  std::vector<std::string> labels;
};

// Analytic M x (M-1) contrast table for the five deterministic schemes.
Eigen::MatrixXd contrast_table(EncMethod scheme, int m_levels);

FittedEncoder fit_contrast(EncMethod scheme, const Dataset& d);
FittedEncoder fit_means(const Dataset& d);
FittedEncoder fit_lowrank(const Dataset& d, int k);
FittedEncoder fit_sparse_lowrank(const Dataset& d, int k, double lambda,
                                 double lambda1);
FittedEncoder fit_mnl_encoder(const Dataset& d, double reg = 1e-8);
FittedEncoder integer_encode(EncMethod scheme, const Dataset& d,
                             std::uint64_t seed, int copies = 4);

// Dispatch on method; the relevant EncoderOptions fields are consumed.
FittedEncoder fit_encoder(EncMethod method, const Dataset& d,
                          const EncoderOptions& opts = {});

// Categories are matched through level names, so a dataset loaded separately
// from the training file transforms correctly. Unseen levels follow the
// encoder's policy: error, or a method-specific fallback row (global x-mean
// for means, M+1 for integer schemes, zeros otherwise).
EncodingMatrix transform(const FittedEncoder& e, const Dataset& d);

// Versioned JSON model file.
void save_encoder(const FittedEncoder& e, const std::string& path);
FittedEncoder load_encoder(const std::string& path);

}  // namespace catenc
