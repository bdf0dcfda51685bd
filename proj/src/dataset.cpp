#include "catenc/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "catenc/errors.h"

namespace catenc {

ColumnRole column_role_from_string(const std::string& s) {
  if (s == "covariate") return ColumnRole::covariate;
  if (s == "category") return ColumnRole::category;
  if (s == "response") return ColumnRole::response;
  if (s == "ignore") return ColumnRole::ignore;
  throw ConfigError("unknown column role '" + s + "'");
}

std::string to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::covariate: return "covariate";
    case ColumnRole::category: return "category";
    case ColumnRole::response: return "response";
    case ColumnRole::ignore: return "ignore";
  }
  return "?";
}

ColumnSchema ColumnSchema::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.contains("columns") || !j["columns"].is_object())
    throw ConfigError("schema must contain a \"columns\" object");
  ColumnSchema s;
  int categories = 0, responses = 0;
  for (const auto& [name, role] : j["columns"].items()) {
    if (!role.is_string())
      throw ConfigError("schema role for '" + name + "' must be a string");
    const ColumnRole r = column_role_from_string(role.get<std::string>());
    if (r == ColumnRole::category) ++categories;
    if (r == ColumnRole::response) ++responses;
    s.roles[name] = r;
  }
  if (categories != 1)
    throw ConfigError("schema must mark exactly one category column, got " +
                      std::to_string(categories));
  if (responses > 1)
    throw ConfigError("schema marks more than one response column");
  return s;
}

ColumnSchema ColumnSchema::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DataError("row " + std::to_string(row) + ", column '" + col +
                    "': cannot parse '" + cell + "' as a number");
  if (!std::isfinite(v))
    throw DataError("row " + std::to_string(row) + ", column '" + col +
                    "': non-finite value");
  return v;
}

void check_counts(const Dataset& d) {
  for (int l = 0; l < d.m(); ++l)
    if (d.level_counts[l] <= 0)
      throw DataError("category level '" + d.level_names[l] +
                      "' has no rows");
}

}  // namespace

Dataset make_dataset(Eigen::MatrixXd x, std::vector<int> g,
                     std::optional<Eigen::VectorXd> y,
                     std::vector<std::string> level_names,
                     std::vector<std::string> x_names) {
  Dataset d;
  d.x = std::move(x);
  d.g = std::move(g);
  d.y = std::move(y);
  d.level_names = std::move(level_names);
  const int n = d.n();
  if (n == 0) throw DataError("dataset has no rows");
  if (static_cast<int>(d.g.size()) != n)
    throw DataError("category vector length does not match row count");
  if (d.y && d.y->size() != n)
    throw DataError("response length does not match row count");
  if (!d.x.allFinite()) throw DataError("covariates contain non-finite values");
  if (d.y && !d.y->allFinite())
    throw DataError("response contains non-finite values");
  const int m = d.m();
  d.level_counts.assign(m, 0);
  for (int i = 0; i < n; ++i) {
    if (d.g[i] < 0 || d.g[i] >= m)
      throw DataError("category index " + std::to_string(d.g[i]) +
                      " out of range at row " + std::to_string(i));
    ++d.level_counts[d.g[i]];
  }
  check_counts(d);
  if (x_names.empty()) {
    for (int j = 0; j < d.p(); ++j) x_names.push_back("x" + std::to_string(j + 1));
  } else if (static_cast<int>(x_names.size()) != d.p()) {
    throw DataError("covariate name list does not match column count");
  }
  d.x_names = std::move(x_names);
  return d;
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("file '" + path + "' is empty");
  const std::vector<std::string> headers = split_line(line);

  // Every header must have a role and every schema entry must match a header.
  std::vector<ColumnRole> roles(headers.size());
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    auto it = schema.roles.find(headers[c]);
    if (it == schema.roles.end())
      throw ConfigError("column '" + headers[c] + "' is not covered by the schema");
    roles[c] = it->second;
    seen.insert(headers[c]);
  }
  for (const auto& [name, role] : schema.roles)
    if (!seen.count(name))
      throw ConfigError("schema column '" + name + "' is missing from the file");

  std::vector<int> x_cols, cat_col, y_col;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    if (roles[c] == ColumnRole::covariate) x_cols.push_back(static_cast<int>(c));
    if (roles[c] == ColumnRole::category) cat_col.push_back(static_cast<int>(c));
    if (roles[c] == ColumnRole::response) y_col.push_back(static_cast<int>(c));
  }

  std::vector<std::vector<double>> x_rows;
  std::vector<std::string> g_raw;
  std::vector<double> y_vals;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != headers.size())
      throw DataError("row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(headers.size()));
    std::vector<double> xr;
    xr.reserve(x_cols.size());
    for (int c : x_cols) xr.push_back(parse_cell(cells[c], row, headers[c]));
    x_rows.push_back(std::move(xr));
    g_raw.push_back(cells[cat_col[0]]);
    if (!y_col.empty())
      y_vals.push_back(parse_cell(cells[y_col[0]], row, headers[y_col[0]]));
  }
  const int n = static_cast<int>(x_rows.size());
  if (n == 0) throw DataError("file '" + path + "' contains no data rows");

  // Dense 0-based level indices in first-appearance order.
  std::vector<std::string> level_names;
  std::unordered_map<std::string, int> level_index;
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) {
    auto it = level_index.find(g_raw[i]);
    if (it == level_index.end()) {
      const int idx = static_cast<int>(level_names.size());
      level_index.emplace(g_raw[i], idx);
      level_names.push_back(g_raw[i]);
      g[i] = idx;
    } else {
      g[i] = it->second;
    }
  }

  Eigen::MatrixXd x(n, static_cast<int>(x_cols.size()));
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < x_cols.size(); ++j) x(i, j) = x_rows[i][j];

  std::optional<Eigen::VectorXd> y;
  if (!y_col.empty())
    y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);

  std::vector<std::string> x_names;
  for (int c : x_cols) x_names.push_back(headers[c]);

  Dataset d = make_dataset(std::move(x), std::move(g), std::move(y),
                           std::move(level_names), std::move(x_names));
  d.g_name = headers[cat_col[0]];
  if (!y_col.empty()) d.y_name = headers[y_col[0]];
  return d;
}

void write_csv(const Dataset& d, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  for (int j = 0; j < d.p(); ++j)
    std::fprintf(f, "%s,", d.x_names[j].c_str());
  std::fprintf(f, "%s", d.g_name.c_str());
  if (d.y) std::fprintf(f, ",%s", d.y_name.c_str());
  std::fprintf(f, "\n");
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) std::fprintf(f, "%.17g,", d.x(i, j));
    std::fprintf(f, "%s", d.level_names[d.g[i]].c_str());
    if (d.y) std::fprintf(f, ",%.17g", (*d.y)(i));
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

Dataset split_rows(const Dataset& d, const std::vector<int>& rows) {
  if (rows.empty()) throw DataError("row subset is empty");
  std::unordered_set<int> dupes;
  for (int r : rows) {
    if (r < 0 || r >= d.n())
      throw DataError("row index " + std::to_string(r) + " out of range");
    if (!dupes.insert(r).second)
      throw DataError("duplicate row index " + std::to_string(r));
  }
  Dataset out;
  const int k = static_cast<int>(rows.size());
  out.x.resize(k, d.p());
  out.g.resize(k);
  if (d.y) out.y = Eigen::VectorXd(k);
  for (int i = 0; i < k; ++i) {
    out.x.row(i) = d.x.row(rows[i]);
    out.g[i] = d.g[rows[i]];
    if (d.y) (*out.y)(i) = (*d.y)(rows[i]);
  }
  out.level_names = d.level_names;
  out.level_counts.assign(d.m(), 0);
  for (int gi : out.g) ++out.level_counts[gi];
  out.x_names = d.x_names;
  out.g_name = d.g_name;
  out.y_name = d.y_name;
  return out;
}

}  // namespace catenc
