// Python bindings for the catenc core. Categories cross the boundary as
// per-row strings; the dense 0-based index mapping stays an internal detail.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "catenc/bench.h"
#include "catenc/dataset.h"
#include "catenc/encoders.h"
#include "catenc/errors.h"
#include "catenc/linalg.h"
#include "catenc/mnl.h"
#include "catenc/oracle.h"
#include "catenc/simulate.h"
#include "catenc/spca.h"
#include "catenc/stats.h"

namespace py = pybind11;
using namespace catenc;

namespace {

// First-appearance level catalog from raw string labels.
Dataset dataset_from_labels(Eigen::MatrixXd x,
                            const std::vector<std::string>& labels,
                            std::optional<Eigen::VectorXd> y) {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;
  std::vector<int> g;
  g.reserve(labels.size());
  for (const auto& s : labels) {
    auto it = index.find(s);
    if (it == index.end()) {
      it = index.emplace(s, static_cast<int>(names.size())).first;
      names.push_back(s);
    }
    g.push_back(it->second);
  }
  if (x.size() == 0 && x.rows() == 0) {
    x.resize(static_cast<Eigen::Index>(labels.size()), 0);
  }
  return make_dataset(std::move(x), std::move(g), std::move(y),
                      std::move(names));
}

EncoderOptions options_from_kwargs(int k, double lambda, double lambda1,
                                   double reg, int copies, std::uint64_t seed,
                                   const std::string& unseen) {
  EncoderOptions o;
  o.k = k;
  o.lambda = lambda;
  o.lambda1 = lambda1;
  o.reg = reg;
  o.copies = copies;
  o.seed = seed;
  if (unseen == "error") {
    o.unseen = UnseenPolicy::error;
  } else if (unseen == "fallback") {
    o.unseen = UnseenPolicy::fallback;
  } else {
    throw ConfigError("unseen must be 'error' or 'fallback', got '" + unseen +
                      "'");
  }
  return o;
}

}  // namespace

PYBIND11_MODULE(_catenc, m) {
  m.doc() = "sufficient-representation encoders for categorical variables";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<FittedEncoder>(m, "Encoder")
      .def_property_readonly(
          "method", [](const FittedEncoder& e) { return to_string(e.method); })
      .def_readonly("output_dim", &FittedEncoder::output_dim)
      .def_readonly("level_names", &FittedEncoder::level_names)
      .def(
          "transform",
          [](const FittedEncoder& e, const std::vector<std::string>& labels) {
            Dataset d = dataset_from_labels(Eigen::MatrixXd(), labels,
                                            std::nullopt);
            EncodingMatrix enc = transform(e, d);
            return py::make_tuple(enc.s, enc.labels);
          },
          py::arg("categories"),
          "Encode per-row category labels; returns (matrix, column_labels).")
      .def("save", [](const FittedEncoder& e,
                      const std::string& path) { save_encoder(e, path); });

  m.def(
      "fit_encoder",
      [](const std::string& method, const Eigen::MatrixXd& x,
         const std::vector<std::string>& categories,
         std::optional<Eigen::VectorXd> y, int k, double lambda,
         double lambda1, double reg, int copies, std::uint64_t seed,
         const std::string& unseen) {
        Dataset d = dataset_from_labels(x, categories, std::move(y));
        return fit_encoder(enc_method_from_string(method), d,
                           options_from_kwargs(k, lambda, lambda1, reg, copies,
                                               seed, unseen));
      },
      py::arg("method"), py::arg("x"), py::arg("categories"),
      py::arg("y") = std::nullopt, py::arg("k") = 1, py::arg("lambda_") = 0.0,
      py::arg("lambda1") = 0.0, py::arg("reg") = 1e-8, py::arg("copies") = 4,
      py::arg("seed") = 0, py::arg("unseen") = "fallback");

  m.def("load_encoder", &load_encoder, py::arg("path"));

  m.def(
      "contrast_table",
      [](const std::string& scheme, int m_levels) {
        return contrast_table(enc_method_from_string(scheme), m_levels);
      },
      py::arg("scheme"), py::arg("m"));

  m.def(
      "group_averages",
      [](const Eigen::MatrixXd& x, const std::vector<int>& g, int m_levels) {
        return group_averages(x, g, m_levels).omega;
      },
      py::arg("x"), py::arg("g"), py::arg("m"));

  m.def(
      "simulate",
      [](int n, int num_latent, int num_groups, int p, double p_assign,
         const std::string& setup, std::uint64_t seed, bool shared_support) {
        SimConfig cfg;
        cfg.n = n;
        cfg.num_latent = num_latent;
        cfg.num_groups = num_groups;
        cfg.p = p;
        cfg.p_assign = p_assign;
        cfg.setup = sim_setup_from_string(setup);
        cfg.seed = seed;
        cfg.shared_support = shared_support;
        SimOutput out = simulate(cfg);
        py::dict r;
        r["x"] = out.dataset.x;
        r["g"] = out.dataset.g;
        r["y"] = *out.dataset.y;
        r["categories"] = out.dataset.level_names;
        r["latent"] = out.latent;
        r["regen_count"] = out.regen_count;
        return r;
      },
      py::arg("n"), py::arg("num_latent"), py::arg("num_groups"), py::arg("p"),
      py::arg("p_assign") = 0.9, py::arg("setup") = "global_linear",
      py::arg("seed") = 0, py::arg("shared_support") = false);

  m.def(
      "svd",
      [](const Eigen::MatrixXd& a) {
        SvdFactors f = svd(a);
        return py::make_tuple(f.u, f.d, f.v);
      },
      py::arg("m"));
  m.def("pseudo_inverse", &pseudo_inverse, py::arg("m"),
        py::arg("tol") = 1e-10);

  m.def(
      "sparse_pca",
      [](const Eigen::MatrixXd& a, int k, double lambda, double lambda1) {
        SpcaFactors f = sparse_pca(a, k, lambda, lambda1);
        py::dict r;
        r["a"] = f.a;
        r["b"] = f.b;
        r["objective_trace"] = f.objective_trace;
        r["converged"] = f.converged;
        return r;
      },
      py::arg("m"), py::arg("k"), py::arg("lambda_") = 0.0,
      py::arg("lambda1") = 0.0);

  m.def(
      "fit_mnl",
      [](const Eigen::MatrixXd& x, const std::vector<int>& g, double reg,
         int max_iter, double tol) {
        MnlModel model = fit_mnl(x, g, reg, max_iter, tol);
        py::dict r;
        r["theta"] = model.theta;
        r["converged"] = model.converged;
        r["iterations"] = model.iterations;
        r["grad_norm"] = model.grad_norm;
        return r;
      },
      py::arg("x"), py::arg("g"), py::arg("reg") = 1e-8,
      py::arg("max_iter") = 500, py::arg("tol") = 1e-6);
  m.def("mnl_probabilities", &mnl_probabilities, py::arg("theta"),
        py::arg("x"));

  m.def("knn_regress", &knn_regress, py::arg("train_x"), py::arg("train_y"),
        py::arg("test_x"), py::arg("k"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        TTestResult r = paired_t_test(a, b);
        return py::make_tuple(r.t, r.p);
      },
      py::arg("a"), py::arg("b"));
  m.def("student_t_cdf", &student_t_cdf, py::arg("t"), py::arg("df"));
  m.def("student_t_two_sided_p", &student_t_two_sided_p, py::arg("t"),
        py::arg("df"));

  m.def(
      "run_benchmark",
      [](const std::string& config_json, const std::string& fmt) {
        BenchReport r = run_benchmark(bench_config_from_json(config_json));
        if (fmt == "csv") return report_to_csv(r);
        if (fmt == "json") return report_to_json(r);
        throw ConfigError("format must be 'csv' or 'json', got '" + fmt + "'");
      },
      py::arg("config_json"), py::arg("format") = "csv");
}
