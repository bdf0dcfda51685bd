#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace catenc {

enum class ColumnRole { covariate, category, response, ignore };

ColumnRole column_role_from_string(const std::string& s);
std::string to_string(ColumnRole r);

// Maps CSV headers to roles. Every header of the file must be covered;
// exactly one category column and at most one response column are allowed.
// File format: JSON, {"columns": {"x1": "covariate", "city": "category", ...}}
struct ColumnSchema {
  std::unordered_map<std::string, ColumnRole> roles;

  static ColumnSchema from_file(const std::string& path);
  static ColumnSchema from_json_text(const std::string& text);
};

// In-memory dataset: continuous covariates, one categorical column mapped to
// dense 0-based indices in first-appearance order, optional response.
// Immutable by convention after construction; safe to share across readers.
struct Dataset {
  Eigen::MatrixXd x;                     // n x p
  std::vector<int> g;                    // n, values in [0, M)
  std::optional<Eigen::VectorXd> y;      // n, if present
  std::vector<std::string> level_names;  // M, first-appearance order
  std::vector<int> level_counts;         // M; 0 allowed only in row subsets
  std::vector<std::string> x_names;
  std::string g_name = "g";
  std::string y_name = "y";

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(level_names.size()); }
};

// Validating constructor for programmatic use (simulator, tests, bindings).
// Requires every level index in [0,M) to occur at least once.
Dataset make_dataset(Eigen::MatrixXd x, std::vector<int> g,
                     std::optional<Eigen::VectorXd> y,
                     std::vector<std::string> level_names,
                     std::vector<std::string> x_names = {});

Dataset load_csv(const std::string& path, const ColumnSchema& schema);

// Inverse of load_csv: header row, then one line per observation.
void write_csv(const Dataset& d, const std::string& path);

// Row subset in the order given by `rows`. The level catalog is kept whole;
// levels absent from the subset stay with a zero count.
Dataset split_rows(const Dataset& d, const std::vector<int>& rows);

}  // namespace catenc
