#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coxmi/aipw.hpp"
#include "coxmi/complete_case.hpp"
#include "coxmi/cox.hpp"
#include "coxmi/dataset.hpp"
#include "coxmi/errors.hpp"
#include "coxmi/nnmi.hpp"
#include "coxmi/rng.hpp"
#include "coxmi/simulation.hpp"

namespace py = pybind11;
using namespace coxmi;

namespace {

// x entries that are NaN mark missing values.
Dataset dataset_from_arrays(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                            const Eigen::VectorXd& x, const Eigen::MatrixXd& z) {
  const Eigen::Index n = time.size();
  if (event.size() != n || x.size() != n || z.rows() != n) {
    throw DimensionMismatchError("arrays disagree on the number of rows");
  }
  Dataset data(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    SurvivalRecord& rec = data[static_cast<std::size_t>(i)];
    rec.time = time[i];
    rec.event = event[i];
    if (!std::isnan(x[i])) rec.x = x[i];
    rec.z.resize(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index k = 0; k < z.cols(); ++k) rec.z[static_cast<std::size_t>(k)] = z(i, k);
  }
  return data;
}

CoxData cox_data(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                 const Eigen::MatrixXd& covariates) {
  CoxData data;
  data.time = time;
  data.event = event;
  data.covariates = covariates;
  return data;
}

py::dict cox_fit_dict(const CoxFit& fit) {
  py::dict out;
  out["beta"] = fit.beta;
  out["se"] = Eigen::VectorXd(fit.covariance.diagonal().cwiseSqrt());
  out["covariance"] = fit.covariance;
  out["loglik"] = fit.loglik;
  out["n_iter"] = fit.n_iter;
  return out;
}

py::dict pooled_dict(const PooledEstimate& pe) {
  py::dict out;
  out["beta"] = pe.beta;
  out["variance"] = pe.variance;
  out["df"] = pe.df;
  out["ci_lower"] = pe.ci_lower;
  out["ci_upper"] = pe.ci_upper;
  out["p_value"] = pe.p_value;
  out["m_used"] = pe.m_used;
  return out;
}

ImputationConfig make_config(int nn, double w1, double w2, int m, std::uint64_t seed,
                             unsigned workers) {
  ImputationConfig config;
  config.nn = nn;
  config.w1 = w1;
  config.w2 = w2;
  config.m = m;
  config.seed = seed;
  config.workers = workers;
  return config;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cox regression with a missing covariate: complete-case, AIPW and "
            "nearest-neighbor multiple imputation";

  py::register_exception<Error>(m, "CoxmiError");

  m.def(
      "fit_cox",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event,
         const Eigen::MatrixXd& covariates) {
        return cox_fit_dict(fit_cox(cox_data(time, event, covariates)));
      },
      py::arg("time"), py::arg("event"), py::arg("covariates"),
      "Cox partial-likelihood fit (Breslow ties). Returns beta, se, covariance, "
      "loglik, n_iter.");

  m.def(
      "nelson_aalen",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event) {
        const StepFunction h = nelson_aalen(time, event);
        return py::make_tuple(h.knots(), h.values());
      },
      py::arg("time"), py::arg("event"),
      "Marginal cumulative-hazard estimate as (knots, values).");

  m.def(
      "fit_complete_case",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event,
         const Eigen::VectorXd& x, const Eigen::MatrixXd& z) {
        return cox_fit_dict(fit_complete_case(dataset_from_arrays(time, event, x, z)));
      },
      py::arg("time"), py::arg("event"), py::arg("x"), py::arg("z"),
      "Complete-case Cox fit; NaN entries of x mark missing values.");

  m.def(
      "fit_aipw",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event,
         const Eigen::VectorXd& x, const Eigen::MatrixXd& z, int n_boot,
         std::uint64_t seed, unsigned workers) {
        const AipwResult r = aipw_bootstrap_se(dataset_from_arrays(time, event, x, z),
                                               AipwSpecs{}, n_boot, seed, workers);
        py::dict out;
        out["beta"] = r.beta;
        out["se"] = r.se;
        out["diverged"] = r.diverged;
        out["n_boot_failures"] = r.n_boot_failures;
        return out;
      },
      py::arg("time"), py::arg("event"), py::arg("x"), py::arg("z"),
      py::arg("n_boot") = 500, py::arg("seed") = 0, py::arg("workers") = 1,
      "Augmented IPW estimate with bootstrap standard errors.");

  m.def(
      "fit_nnmi",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event,
         const Eigen::VectorXd& x, const Eigen::MatrixXd& z, int nn, double w1,
         double w2, int mi, std::uint64_t seed, unsigned workers) {
        return pooled_dict(nnmi_estimate(dataset_from_arrays(time, event, x, z),
                                         make_config(nn, w1, w2, mi, seed, workers)));
      },
      py::arg("time"), py::arg("event"), py::arg("x"), py::arg("z"), py::arg("nn") = 5,
      py::arg("w1") = 0.8, py::arg("w2") = 0.2, py::arg("m") = 10, py::arg("seed") = 0,
      py::arg("workers") = 1,
      "Nearest-neighbor multiple imputation estimate pooled by Rubin's rules.");

  m.def(
      "impute",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& event,
         const Eigen::VectorXd& x, const Eigen::MatrixXd& z, int nn, double w1,
         double w2, int mi, std::uint64_t seed) {
        const Dataset data = dataset_from_arrays(time, event, x, z);
        const ImputationConfig config = make_config(nn, w1, w2, mi, seed, 1);
        validate(config);
        std::vector<Eigen::VectorXd> out;
        for (int i = 0; i < mi; ++i) {
          Rng rng(derive_seed(seed, "impute", static_cast<std::uint64_t>(i)));
          const Dataset completed = impute_once(data, config, rng);
          Eigen::VectorXd xs(static_cast<Eigen::Index>(completed.size()));
          for (std::size_t r = 0; r < completed.size(); ++r) {
            xs[static_cast<Eigen::Index>(r)] = *completed[r].x;
          }
          out.push_back(std::move(xs));
        }
        return out;
      },
      py::arg("time"), py::arg("event"), py::arg("x"), py::arg("z"), py::arg("nn") = 5,
      py::arg("w1") = 0.8, py::arg("w2") = 0.2, py::arg("m") = 10, py::arg("seed") = 0,
      "M completed copies of x (observed entries unchanged).");

  m.def(
      "generate_dataset",
      [](const std::string& scenario, int n, std::uint64_t seed,
         const std::string& x_link, const std::string& miss_link) {
        const Scenario sc = make_scenario(scenario, n, x_link, miss_link);
        Rng rng(seed);
        const GeneratedData gen = generate_dataset(sc, rng);
        const Eigen::Index rows = static_cast<Eigen::Index>(gen.full.size());
        Eigen::VectorXd time(rows), x_full(rows), x_obs(rows), z(rows);
        Eigen::VectorXi event(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
          const auto& full = gen.full[static_cast<std::size_t>(i)];
          const auto& obs = gen.observed[static_cast<std::size_t>(i)];
          time[i] = full.time;
          event[i] = full.event;
          x_full[i] = *full.x;
          x_obs[i] = obs.x_observed() ? *obs.x : std::nan("");
          z[i] = full.z[0];
        }
        py::dict out;
        out["time"] = time;
        out["event"] = event;
        out["x_full"] = x_full;
        out["x_observed"] = x_obs;
        out["z"] = z;
        out["censoring_rate"] = gen.censoring_rate();
        out["missing_rate"] = gen.missing_rate();
        return out;
      },
      py::arg("scenario") = "table4", py::arg("n") = 400, py::arg("seed") = 0,
      py::arg("x_link") = "", py::arg("miss_link") = "",
      "One simulated dataset; x_observed has NaN where the covariate is missing.");

  m.def("builtin_scenarios", [] {
    py::list out;
    for (const Scenario& s : builtin_scenarios()) {
      nlohmann::json j = s;
      out.append(json_to_py(j));
    }
    return out;
  });

  m.def(
      "run_monte_carlo",
      [](const std::string& scenario, int n, const std::vector<std::string>& methods,
         int reps, std::uint64_t seed, int aipw_n_boot, unsigned workers) {
        const Scenario sc = make_scenario(scenario, n);
        std::vector<Method> ms;
        for (const std::string& name : methods) {
          const auto m_ = parse_method(name);
          if (!m_) throw ConfigError("unknown method '" + name + "'");
          ms.push_back(*m_);
        }
        MonteCarloOptions options;
        options.replicates = reps;
        options.seed = seed;
        options.aipw_n_boot = aipw_n_boot;
        options.workers = workers;
        return json_to_py(summary_json(run_monte_carlo(sc, ms, options)));
      },
      py::arg("scenario"), py::arg("n"), py::arg("methods"), py::arg("reps"),
      py::arg("seed") = 0, py::arg("aipw_n_boot") = 500, py::arg("workers") = 0,
      "Monte Carlo summary (one row per method-coefficient pair) as a dict.");

#ifdef COXMI_VERSION
  m.attr("__version__") = COXMI_VERSION;
#endif
}
