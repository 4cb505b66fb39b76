#include "coxmi/cli.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coxmi/aipw.hpp"
#include "coxmi/complete_case.hpp"
#include "coxmi/errors.hpp"
#include "coxmi/io.hpp"
#include "coxmi/nnmi.hpp"
#include "coxmi/rng.hpp"
#include "coxmi/simulation.hpp"

#ifndef COXMI_VERSION
#define COXMI_VERSION "0.0.0"
#endif

namespace coxmi {

namespace {

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// The reproducibility block every command reports on standard error.
void emit_metadata(const nlohmann::json& meta) {
  nlohmann::json block = meta;
  block["version"] = COXMI_VERSION;
  block["config_hash"] = tag_hash(meta.dump());
  std::cerr << "metadata: " << block.dump() << '\n';
}

struct IoOpts {
  std::string input;
  std::string time_col = "time";
  std::string status_col = "status";
  std::string missing_col;
  std::vector<std::string> covariates;
  std::vector<std::string> categorical;  // column=reference
  std::string sentinel;
};

void add_io_options(CLI::App* cmd, IoOpts& io) {
  cmd->add_option("--input", io.input, "Input CSV with a header row")->required();
  cmd->add_option("--time-col", io.time_col, "Observed-time column");
  cmd->add_option("--status-col", io.status_col, "Event indicator column (1 = failure)");
  cmd->add_option("--missing-col", io.missing_col,
                  "Covariate column that may have missing cells")
      ->required();
  cmd->add_option("--covariates", io.covariates,
                  "Fully observed covariate columns (comma separated)")
      ->delimiter(',')
      ->required();
  cmd->add_option("--categorical", io.categorical,
                  "Categorical covariate as column=reference_level (repeatable)");
  cmd->add_option("--missing-sentinel", io.sentinel,
                  "Token treated as missing in addition to the empty cell");
}

DatasetSchema make_schema(const IoOpts& io) {
  DatasetSchema schema;
  schema.time_column = io.time_col;
  schema.status_column = io.status_col;
  schema.missing_covariate_column = io.missing_col;
  schema.covariate_columns = io.covariates;
  schema.missing_sentinel = io.sentinel;
  for (const std::string& spec : io.categorical) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--categorical expects column=reference_level, got '" + spec + "'");
    }
    schema.categorical_encodings[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  return schema;
}

void write_or_print(const std::vector<AnalysisResult>& results, const std::string& format,
                    const std::string& output) {
  if (output.empty()) {
    if (format == "json") {
      std::cout << results_json(results).dump(2) << '\n';
    } else {
      std::cout << results_csv(results);
    }
  } else {
    write_results(results, format, output);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Cox regression with a missing covariate: complete-case, AIPW and "
               "nearest-neighbor multiple imputation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file (flags override)");
  app.set_version_flag("--version", COXMI_VERSION);

  std::uint64_t seed = 0;
  std::string output;
  std::string format = "csv";
  unsigned workers = 0;

  // analyze
  CLI::App* analyze = app.add_subcommand("analyze", "Fit estimators to a CSV dataset");
  IoOpts an_io;
  add_io_options(analyze, an_io);
  std::vector<std::string> an_methods;
  int an_boot = 500;
  ImputationConfig an_nnmi;
  an_nnmi.m = 50;  // analysis-scale default; simulation uses 10
  analyze->add_option("--method", an_methods, "cc, aipw or nnmi (repeatable; default all)")
      ->check(CLI::IsMember({"cc", "aipw", "nnmi"}));
  analyze->add_option("--boot", an_boot, "AIPW bootstrap resamples")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--nn", an_nnmi.nn, "Imputing-set size")->check(CLI::PositiveNumber);
  analyze->add_option("--w1", an_nnmi.w1, "Weight on the x-predictive score");
  analyze->add_option("--w2", an_nnmi.w2, "Weight on the missingness score");
  analyze->add_option("--m", an_nnmi.m, "Number of imputations")->check(CLI::PositiveNumber);

  // simulate
  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo study");
  std::string sc_name = "table4";
  int sc_n = 400;
  int sc_reps = 500;
  std::string x_link, miss_link;
  std::vector<std::string> sim_methods;
  MonteCarloOptions mc;
  simulate->add_option("--scenario", sc_name,
                       "table4, table5 or their *_cloglog variants");
  simulate->add_option("--n", sc_n, "Sample size per replicate");
  simulate->add_option("--reps", sc_reps, "Number of replicates");
  simulate->add_option("--x-link", x_link, "Override the x-law link (logit/cloglog)");
  simulate->add_option("--miss-link", miss_link, "Override the miss-law link (logit/cloglog)");
  simulate->add_option("--method", sim_methods, "Method subset (repeatable; default all 8)");
  simulate->add_option("--boot", mc.aipw_n_boot, "AIPW bootstrap resamples")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--nn", mc.nnmi_nn, "Imputing-set size")->check(CLI::PositiveNumber);
  simulate->add_option("--w1", mc.nnmi_w1, "Weight on the x-predictive score");
  simulate->add_option("--w2", mc.nnmi_w2, "Weight on the missingness score");
  simulate->add_option("--m", mc.nnmi_m, "Imputations per replicate")
      ->check(CLI::PositiveNumber);

  // impute
  CLI::App* impute = app.add_subcommand(
      "impute", "Write completed datasets without fitting Cox models");
  IoOpts im_io;
  add_io_options(impute, im_io);
  ImputationConfig im_config;
  impute->add_option("--nn", im_config.nn, "Imputing-set size")->check(CLI::PositiveNumber);
  impute->add_option("--w1", im_config.w1, "Weight on the x-predictive score");
  impute->add_option("--w2", im_config.w2, "Weight on the missingness score");
  impute->add_option("--m", im_config.m, "Number of completed datasets")
      ->check(CLI::PositiveNumber);

  for (CLI::App* cmd : {analyze, simulate, impute}) {
    cmd->add_option("--seed", seed, "Master seed (auto-generated when omitted)");
    cmd->add_option("--output", output,
                    "Output path (analyze/simulate: file, default stdout; impute: prefix)");
    cmd->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--workers", workers, "Worker threads (0 = hardware)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    if (!cmd->count("--seed")) seed = random_seed();
    std::cerr << "seed: " << seed << '\n';

    if (cmd == analyze) {
      const DatasetSchema schema = make_schema(an_io);
      const LoadedData loaded = load_csv(an_io.input, schema);
      std::vector<std::string> names = {loaded.x_name};
      names.insert(names.end(), loaded.covariate_names.begin(), loaded.covariate_names.end());
      if (an_methods.empty()) an_methods = {"cc", "aipw", "nnmi"};

      nlohmann::json meta{{"command", "analyze"},
                          {"input", an_io.input},
                          {"seed", seed},
                          {"methods", an_methods},
                          {"n", loaded.data.size()},
                          {"n_missing", missing_rows(loaded.data).size()}};
      std::vector<AnalysisResult> results;
      for (const std::string& method : an_methods) {
        if (method == "cc") {
          const CoxFit fit = fit_complete_case(loaded.data);
          AnalysisResult res = make_normal_result(
              "cc", names, fit.beta, fit.covariance.diagonal().cwiseSqrt());
          res.metadata = {{"n_complete", complete_rows(loaded.data).size()}};
          results.push_back(std::move(res));
        } else if (method == "aipw") {
          const AipwResult fit = aipw_bootstrap_se(
              loaded.data, AipwSpecs{}, an_boot, derive_seed(seed, "analyze_aipw"), workers);
          if (fit.diverged) throw DivergedError("aipw: estimating equation diverged");
          AnalysisResult res = make_normal_result("aipw", names, fit.beta, fit.se);
          res.metadata = {{"n_boot", an_boot}, {"n_boot_failures", fit.n_boot_failures}};
          results.push_back(std::move(res));
        } else {
          ImputationConfig config = an_nnmi;
          config.seed = derive_seed(seed, "analyze_nnmi");
          config.workers = workers;
          const PooledEstimate pe = nnmi_estimate(loaded.data, config);
          AnalysisResult res;
          res.method = "nnmi";
          for (Eigen::Index k = 0; k < pe.beta.size(); ++k) {
            CoefficientResult c;
            c.name = names[static_cast<std::size_t>(k)];
            c.beta = pe.beta[k];
            c.se = std::sqrt(pe.variance[k]);
            c.hr = std::exp(pe.beta[k]);
            c.ci_lower = std::exp(pe.ci_lower[k]);
            c.ci_upper = std::exp(pe.ci_upper[k]);
            c.p_value = pe.p_value[k];
            c.df = pe.df[k];
            res.coefficients.push_back(std::move(c));
          }
          res.metadata = {{"m", config.m}, {"nn", config.nn},
                          {"w1", config.w1}, {"w2", config.w2}};
          results.push_back(std::move(res));
        }
      }
      emit_metadata(meta);
      write_or_print(results, format, output);
    } else if (cmd == simulate) {
      if (sc_reps < 1) throw ConfigError("simulate: --reps must be at least 1");
      if (sc_reps < 500) {
        std::cerr << "warning: desk-scale run (" << sc_reps
                  << " replicates); Monte Carlo noise will be elevated\n";
      }
      const Scenario scenario = make_scenario(sc_name, sc_n, x_link, miss_link);
      std::vector<Method> methods;
      if (sim_methods.empty()) {
        methods = all_methods();
      } else {
        for (const std::string& name : sim_methods) {
          const auto m = parse_method(name);
          if (!m) throw ConfigError("simulate: unknown method '" + name + "'");
          methods.push_back(*m);
        }
      }
      mc.replicates = sc_reps;
      mc.seed = seed;
      mc.workers = workers;
      const MonteCarloSummary summary = run_monte_carlo(scenario, methods, mc);

      nlohmann::json meta{{"command", "simulate"},
                          {"seed", seed},
                          {"scenario", scenario},
                          {"replicates", sc_reps},
                          {"aipw_n_boot", mc.aipw_n_boot}};
      emit_metadata(meta);
      const std::string text =
          format == "json" ? summary_json(summary).dump(2) + "\n" : summary_csv(summary);
      if (output.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(output, std::ios::binary);
        if (!out) throw IoError("cannot write '" + output + "'");
        out << text;
      }
    } else {
      const DatasetSchema schema = make_schema(im_io);
      const LoadedData loaded = load_csv(im_io.input, schema);
      im_config.seed = seed;
      validate(im_config);
      const std::string prefix = output.empty() ? "imputed" : output;
      nlohmann::json meta{{"command", "impute"},   {"input", im_io.input},
                          {"seed", seed},          {"m", im_config.m},
                          {"nn", im_config.nn},    {"w1", im_config.w1},
                          {"w2", im_config.w2},    {"prefix", prefix}};
      for (int i = 0; i < im_config.m; ++i) {
        Rng rng(derive_seed(seed, "impute", static_cast<std::uint64_t>(i)));
        const Dataset completed = impute_once(loaded.data, im_config, rng);
        write_dataset_csv(prefix + "_" + std::to_string(i + 1) + ".csv", completed,
                          loaded.x_name, loaded.covariate_names);
      }
      emit_metadata(meta);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace coxmi
