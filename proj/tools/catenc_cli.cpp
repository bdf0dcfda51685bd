// Command-line front end: simulate, encode, oracle-check, bench.
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
// failure. Diagnostics go to stderr; results go to files or stdout.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catenc/bench.h"
#include "catenc/dataset.h"
#include "catenc/encoders.h"
#include "catenc/errors.h"
#include "catenc/oracle.h"
#include "catenc/simulate.h"

namespace {

using namespace catenc;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
}

struct SimulateArgs {
  SimConfig cfg;
  std::string setup = "global_linear";
  std::string out;
  std::string params_out;
  bool with_latent = false;
};

void run_simulate(SimulateArgs& a) {
  a.cfg.setup = sim_setup_from_string(a.setup);
  const SimOutput sim = simulate(a.cfg);
  const Dataset& d = sim.dataset;

  std::string text;
  for (int j = 0; j < d.p(); ++j) text += d.x_names[j] + ",";
  text += "g,y";
  if (a.with_latent) text += ",latent";
  text += "\n";
  char buf[40];
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", d.x(i, j));
      text += buf;
    }
    text += d.level_names[d.g[i]];
    std::snprintf(buf, sizeof buf, ",%.17g", (*d.y)(i));
    text += buf;
    if (a.with_latent) text += "," + std::to_string(sim.latent[i]);
    text += "\n";
  }
  write_text(a.out, text);

  std::string params_path = a.params_out;
  if (params_path.empty() && !a.out.empty() && a.out != "-")
    params_path = a.out + ".params.json";
  if (!params_path.empty())
    write_text(params_path,
               sim_params_to_json(a.cfg, sim.params, sim.regen_count));
}

struct EncodeArgs {
  std::string method;
  std::string input;
  std::string schema;
  std::string out;
  std::string model_in;
  std::string model_out;
  std::string unseen = "fallback";
  EncoderOptions opts;
};

void run_encode(EncodeArgs& a) {
  const ColumnSchema schema = ColumnSchema::from_file(a.schema);
  const Dataset d = load_csv(a.input, schema);

  FittedEncoder enc;
  if (!a.model_in.empty()) {
    enc = load_encoder(a.model_in);
  } else {
    if (a.method.empty())
      throw ConfigError("encode: --method is required unless --model is given");
    if (a.unseen == "error")
      a.opts.unseen = UnseenPolicy::error;
    else if (a.unseen == "fallback")
      a.opts.unseen = UnseenPolicy::fallback;
    else
      throw ConfigError("encode: --unseen must be error or fallback");
    enc = fit_encoder(enc_method_from_string(a.method), d, a.opts);
  }
  const EncodingMatrix s = transform(enc, d);
  if (!a.model_out.empty()) save_encoder(enc, a.model_out);

  // The encoding columns replace the category column.
  std::string text;
  for (int j = 0; j < d.p(); ++j) text += d.x_names[j] + ",";
  for (std::size_t j = 0; j < s.labels.size(); ++j) {
    text += s.labels[j];
    text += (j + 1 < s.labels.size() || d.y) ? "," : "";
  }
  if (d.y) text += d.y_name;
  text += "\n";
  char buf[40];
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", d.x(i, j));
      text += buf;
    }
    for (int j = 0; j < s.s.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", s.s(i, j));
      text += buf;
      if (j + 1 < s.s.cols() || d.y) text += ",";
    }
    if (d.y) {
      std::snprintf(buf, sizeof buf, "%.17g", (*d.y)(i));
      text += buf;
    }
    text += "\n";
  }
  write_text(a.out, text);
}

struct OracleArgs {
  int k = 3;
  int groups = 12;
  int p = 5;
  int support = 6;
  std::uint64_t seed = 1;
  int mnl_n = 100000;
  int mnl_mc = 200000;
};

int run_oracle_check(const OracleArgs& a) {
  Rng rng(derive_seed(a.seed, 7));
  const LatentWorld w = build_world(a.k, a.groups, a.p, a.support, rng);

  const Eigen::MatrixXd omega = world_omega(w);
  const double err_decomp =
      (omega - w.a * w.psi).cwiseAbs().maxCoeff();
  double err_cols = 0.0;
  for (int g = 0; g < w.m_groups; ++g)
    err_cols = std::max(err_cols, std::abs(w.psi.col(g).sum() - 1.0));

  double err_psi = 0.0, err_means = 0.0, err_lowrank = 0.0;
  for (int s = 0; s < static_cast<int>(w.x_support.size()); ++s) {
    for (int g = 0; g < w.m_groups; ++g) {
      const double direct = mu_direct(w, s, g);
      err_psi = std::max(err_psi, std::abs(mu_via_psi(w, s, g) - direct));
      err_means = std::max(err_means, std::abs(mu_via_means(w, s, g) - direct));
      err_lowrank =
          std::max(err_lowrank, std::abs(mu_via_lowrank(w, s, g) - direct));
    }
  }

  struct Row {
    const char* name;
    double err;
    double tol;
  };
  std::vector<Row> rows = {
      {"psi columns sum to 1", err_cols, 1e-12},
      {"omega = A * psi", err_decomp, 1e-12},
      {"mu via psi = mu direct", err_psi, 1e-10},
      {"mu via means = mu direct", err_means, 1e-8},
      {"mu via lowrank = mu direct", err_lowrank, 1e-8},
  };
  if (a.mnl_n > 0) {
    Rng trng(derive_seed(a.seed, 99));
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(4, 4);  // M=4, p=3
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) theta(r, c) = trng.uniform(-1.0, 1.0);
    const MnlMomentReport rep =
        mnl_moment_check(theta, a.mnl_n, derive_seed(a.seed, 11), a.mnl_mc);
    rows.push_back({"mnl moment identity", rep.max_discrepancy, 0.05});
  }

  bool all_pass = true;
  std::printf("%-28s %-14s %-10s %s\n", "identity", "max_error", "tolerance",
              "status");
  for (const Row& r : rows) {
    const bool pass = r.err <= r.tol;
    all_pass = all_pass && pass;
    std::printf("%-28s %-14.3e %-10.0e %s\n", r.name, r.err, r.tol,
                pass ? "pass" : "FAIL");
  }
  return all_pass ? 0 : 3;
}

struct BenchArgs {
  std::string config_path;
  std::string out;
  std::string format = "csv";
  std::optional<int> seeds, folds, threads, knn_k;
  std::optional<std::uint64_t> master_seed;
};

void run_bench(const BenchArgs& a) {
  std::ifstream in(a.config_path);
  if (!in) throw ConfigError("cannot open config file '" + a.config_path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  BenchConfig cfg = bench_config_from_json(text);
  if (a.seeds) cfg.seeds = *a.seeds;
  if (a.folds) cfg.folds = *a.folds;
  if (a.threads) cfg.threads = *a.threads;
  if (a.knn_k) cfg.knn_k = *a.knn_k;
  if (a.master_seed) cfg.master_seed = *a.master_seed;

  if (a.format != "csv" && a.format != "json")
    throw ConfigError("bench: --format must be csv or json");
  const BenchReport report = run_benchmark(cfg);
  write_text(a.out,
             a.format == "csv" ? report_to_csv(report) : report_to_json(report));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sufficient-representation encoders for categorical variables"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "Generate a latent-state dataset as CSV");
  c_sim->add_option("--n", sim.cfg.n, "rows")->required();
  c_sim->add_option("--latent", sim.cfg.num_latent, "latent level count")
      ->required();
  c_sim->add_option("--groups", sim.cfg.num_groups, "category count")
      ->required();
  c_sim->add_option("--p", sim.cfg.p, "covariate count")->required();
  c_sim->add_option("--p-assign", sim.cfg.p_assign,
                    "in-block assignment probability");
  c_sim->add_option("--setup", sim.setup,
                    "global_linear | latent_linear | latent_piecewise");
  c_sim->add_option("--seed", sim.cfg.seed, "rng seed");
  c_sim->add_flag("--shared-support", sim.cfg.shared_support,
                  "one mean support set for all latent levels");
  c_sim->add_flag("--with-latent", sim.with_latent,
                  "append the latent label column");
  c_sim->add_option("--out", sim.out, "output CSV ('-' = stdout)")->required();
  c_sim->add_option("--params-out", sim.params_out,
                    "parameter JSON (default: <out>.params.json)");

  EncodeArgs enc;
  CLI::App* c_enc = app.add_subcommand(
      "encode", "Fit an encoder and rewrite the category column");
  c_enc->add_option("--method", enc.method,
                    "onehot|deviation|difference|helmert|repeated|permutation|"
                    "multiperm|fisher|means|lowrank|sparselowrank|mnl");
  c_enc->add_option("--input", enc.input, "input CSV")->required();
  c_enc->add_option("--schema", enc.schema, "column-role JSON")->required();
  c_enc->add_option("--out", enc.out, "output CSV ('-' = stdout)")->required();
  c_enc->add_option("--model", enc.model_in, "apply a saved encoder file");
  c_enc->add_option("--model-out", enc.model_out, "save the fitted encoder");
  c_enc->add_option("--k", enc.opts.k, "lowrank/sparselowrank dimension");
  c_enc->add_option("--lambda", enc.opts.lambda, "sparselowrank ridge");
  c_enc->add_option("--lambda1", enc.opts.lambda1, "sparselowrank L1");
  c_enc->add_option("--reg", enc.opts.reg, "mnl ridge");
  c_enc->add_option("--copies", enc.opts.copies, "multiperm mappings");
  c_enc->add_option("--seed", enc.opts.seed, "integer-encoding seed");
  c_enc->add_option("--unseen", enc.unseen, "error | fallback");

  OracleArgs ora;
  CLI::App* c_ora = app.add_subcommand(
      "oracle-check", "Verify the representation identities by enumeration");
  c_ora->add_option("--k", ora.k, "latent level count");
  c_ora->add_option("--groups", ora.groups, "category count");
  c_ora->add_option("--p", ora.p, "covariate dimension");
  c_ora->add_option("--support", ora.support, "covariate support size");
  c_ora->add_option("--seed", ora.seed, "rng seed");
  c_ora->add_option("--mnl-n", ora.mnl_n,
                    "fit sample for the logit moment check (0 = skip)");
  c_ora->add_option("--mnl-mc", ora.mnl_mc, "fresh sample for the moment side");

  BenchArgs ben;
  CLI::App* c_ben = app.add_subcommand(
      "bench", "Cross-validated encoder comparison from a JSON config");
  c_ben->add_option("--config", ben.config_path, "benchmark JSON config")
      ->required();
  c_ben->add_option("--out", ben.out, "report path ('-' = stdout)");
  c_ben->add_option("--format", ben.format, "csv | json");
  c_ben->add_option("--seeds", ben.seeds, "override seed count");
  c_ben->add_option("--folds", ben.folds, "override fold count");
  c_ben->add_option("--threads", ben.threads, "parallel seed workers");
  c_ben->add_option("--knn-k", ben.knn_k, "override learner k (0 = sqrt rule)");
  c_ben->add_option("--master-seed", ben.master_seed, "override master seed");

  try {
    app.parse(argc, argv);
    if (c_sim->parsed()) run_simulate(sim);
    if (c_enc->parsed()) run_encode(enc);
    if (c_ora->parsed()) return run_oracle_check(ora);
    if (c_ben->parsed()) run_bench(ben);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const catenc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const catenc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const catenc::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
