#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "catenc/dataset.h"
#include "catenc/errors.h"
#include "doctest.h"
#include "exact.h"

using namespace catenc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("catenc_dataset_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::path p = temp_dir() / name;
  std::ofstream out(p);
  out << text;
  return p;
}

const char* kSchemaText = R"({"columns": {
  "x1": "covariate", "x2": "covariate", "city": "category", "y": "response"
}})";

}  // namespace

TEST_CASE("schema parsing") {
  ColumnSchema s = ColumnSchema::from_json_text(kSchemaText);
  CHECK(s.roles.at("city") == ColumnRole::category);
  CHECK(s.roles.at("x1") == ColumnRole::covariate);
  CHECK(s.roles.at("y") == ColumnRole::response);

  CHECK_THROWS_AS(ColumnSchema::from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(ColumnSchema::from_json_text(R"({"columns": {}})"),
                  ConfigError);
  // two category columns
  CHECK_THROWS_AS(ColumnSchema::from_json_text(
                      R"({"columns": {"a": "category", "b": "category"}})"),
                  ConfigError);
  // two responses
  CHECK_THROWS_AS(
      ColumnSchema::from_json_text(
          R"({"columns": {"a": "category", "b": "response", "c": "response"}})"),
      ConfigError);
  // unknown role
  CHECK_THROWS_AS(ColumnSchema::from_json_text(
                      R"({"columns": {"a": "category", "b": "weight"}})"),
                  ConfigError);
}

TEST_CASE("load_csv basic and level order") {
  auto p = write_file("basic.csv",
                      "x1,x2,city,y\n"
                      "1.0,2.0,tokyo,0.5\n"
                      "3.0,4.0,lyon,1.5\n"
                      "5.0,6.0,tokyo,2.5\n"
                      "7.0,8.0,oslo,3.5\n");
  ColumnSchema schema = ColumnSchema::from_json_text(kSchemaText);
  Dataset d = load_csv(p.string(), schema);

  CHECK(d.n() == 4);
  CHECK(d.p() == 2);
  CHECK(d.m() == 3);
  CHECK(d.level_names == std::vector<std::string>{"tokyo", "lyon", "oslo"});
  CHECK(d.g == std::vector<int>{0, 1, 0, 2});
  CHECK(d.level_counts == std::vector<int>{2, 1, 1});
  CHECK(d.x(2, 1) == 6.0);
  REQUIRE(d.y.has_value());
  CHECK((*d.y)(3) == 3.5);
  CHECK(d.x_names == std::vector<std::string>{"x1", "x2"});
  CHECK(d.g_name == "city");
}

TEST_CASE("load_csv error paths") {
  ColumnSchema schema = ColumnSchema::from_json_text(kSchemaText);

  auto missing_col = write_file("missing_col.csv", "x1,x2,city\n1,2,a\n");
  CHECK_THROWS_AS(load_csv(missing_col.string(), schema), ConfigError);

  auto extra_col =
      write_file("extra_col.csv", "x1,x2,city,y,z\n1,2,a,3,4\n");
  CHECK_THROWS_AS(load_csv(extra_col.string(), schema), ConfigError);

  auto bad_number =
      write_file("bad_number.csv", "x1,x2,city,y\n1,oops,a,3\n");
  CHECK_THROWS_AS(load_csv(bad_number.string(), schema), DataError);

  auto nonfinite = write_file("nonfinite.csv", "x1,x2,city,y\n1,nan,a,3\n");
  CHECK_THROWS_AS(load_csv(nonfinite.string(), schema), DataError);

  auto ragged = write_file("ragged.csv", "x1,x2,city,y\n1,2,a\n");
  CHECK_THROWS_AS(load_csv(ragged.string(), schema), DataError);

  CHECK_THROWS_AS(load_csv((temp_dir() / "does_not_exist.csv").string(),
                           schema),
                  DataError);
}

TEST_CASE("row-permuted file is a level permutation of the same data") {
  std::vector<std::string> lines = {
      "1,10,a,0.1", "2,20,b,0.2", "3,30,c,0.3", "4,40,a,0.4", "5,50,b,0.5",
      "6,60,c,0.6", "7,70,d,0.7", "8,80,a,0.8", "9,90,d,0.9", "10,100,b,1.0",
  };
  std::string head = "x1,x2,city,y\n";
  std::string fwd = head, rev = head;
  for (const auto& l : lines) fwd += l + "\n";
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) rev += *it + "\n";

  ColumnSchema schema = ColumnSchema::from_json_text(kSchemaText);
  Dataset a = load_csv(write_file("fwd.csv", fwd).string(), schema);
  Dataset b = load_csv(write_file("rev.csv", rev).string(), schema);

  CHECK(a.level_names == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(b.level_names == std::vector<std::string>{"b", "d", "a", "c"});

  // same multiset of (x row, level name, y) either way
  using Row = std::tuple<double, double, std::string, double>;
  auto rows = [](const Dataset& d) {
    std::vector<Row> r;
    for (int i = 0; i < d.n(); ++i) {
      r.emplace_back(d.x(i, 0), d.x(i, 1), d.level_names[d.g[i]], (*d.y)(i));
    }
    std::sort(r.begin(), r.end());
    return r;
  };
  CHECK(rows(a) == rows(b));
}

TEST_CASE("make_dataset validation") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;

  Dataset ok = make_dataset(x, {0, 1, 0}, y, {"a", "b"});
  CHECK(ok.level_counts == std::vector<int>{2, 1});
  CHECK(ok.x_names == std::vector<std::string>{"x1", "x2"});

  // g length mismatch
  CHECK_THROWS_AS(make_dataset(x, {0, 1}, y, {"a", "b"}), DataError);
  // index out of range
  CHECK_THROWS_AS(make_dataset(x, {0, 2, 0}, y, {"a", "b"}), DataError);
  // level with no rows
  CHECK_THROWS_AS(make_dataset(x, {0, 0, 0}, y, {"a", "b"}), DataError);
  // y length mismatch
  Eigen::VectorXd y2(2);
  y2 << 1, 2;
  CHECK_THROWS_AS(make_dataset(x, {0, 1, 0}, y2, {"a", "b"}), DataError);
  // non-finite covariate
  Eigen::MatrixXd xbad = x;
  xbad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(make_dataset(xbad, {0, 1, 0}, y, {"a", "b"}), DataError);
}

TEST_CASE("write_csv round trip preserves doubles exactly") {
  Eigen::MatrixXd x(3, 2);
  x << 0.1, 1.0 / 3.0, -2.5e-17, 3.14159265358979, 7, 1e300;
  Eigen::VectorXd y(3);
  y << -0.1, 0.2, 1.0 / 7.0;
  Dataset d = make_dataset(x, {0, 1, 0}, y, {"u", "v"}, {"p", "q"});
  d.g_name = "cat";

  fs::path p = temp_dir() / "round.csv";
  write_csv(d, p.string());

  ColumnSchema schema = ColumnSchema::from_json_text(R"({"columns": {
    "p": "covariate", "q": "covariate", "cat": "category", "y": "response"}})");
  Dataset back = load_csv(p.string(), schema);
  CHECK(bitwise_equal(back.x, d.x));
  CHECK(bitwise_equal(*back.y, *d.y));
  CHECK(back.g == d.g);
  CHECK(back.level_names == d.level_names);
}

TEST_CASE("split_rows keeps catalog and recounts") {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  Eigen::VectorXd y(5);
  y << 10, 20, 30, 40, 50;
  Dataset d = make_dataset(x, {0, 1, 2, 1, 0}, y, {"a", "b", "c"});

  Dataset s = split_rows(d, {3, 0});
  CHECK(s.n() == 2);
  CHECK(s.m() == 3);  // catalog whole, c now empty
  CHECK(s.g == std::vector<int>{1, 0});
  CHECK(s.level_counts == std::vector<int>{1, 1, 0});
  CHECK(s.x(0, 0) == 4.0);
  CHECK((*s.y)(1) == 10.0);

  CHECK_THROWS_AS(split_rows(d, {0, 0}), DataError);   // duplicate
  CHECK_THROWS_AS(split_rows(d, {5}), DataError);      // out of range
  CHECK_THROWS_AS(split_rows(d, {}), DataError);       // empty
}
