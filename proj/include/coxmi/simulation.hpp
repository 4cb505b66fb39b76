#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coxmi/dataset.hpp"
#include "coxmi/nnmi.hpp"
#include "coxmi/rng.hpp"

namespace coxmi {

// P(X = 1 | z). The parameterization follows the generative notation used
// throughout: logit gives p = 1/(1 + exp(a0 + a1 z)), cloglog gives
// p = exp(-exp(a0 + a1 z)); constant ignores z and uses p = a0.
struct BernoulliLaw {
  enum class Kind { Constant, Logit, Cloglog };
  Kind kind = Kind::Constant;
  double a0 = 0.5;
  double a1 = 0.0;

  double operator()(double z) const;
};

// P(delta_x = 1 | z, y) with eta = e0 + ez z + ey y: logit gives
// 1/(1 + exp(eta)), cloglog gives exp(-exp(eta)).
struct SelectionLaw {
  enum class Kind { Logit, Cloglog };
  Kind kind = Kind::Logit;
  double e0 = 0.0;
  double ez = 0.0;
  double ey = 0.0;

  double operator()(double z, double y) const;
};

struct Scenario {
  std::string label;
  int n = 0;
  double beta_x = 0.0;   // true log hazard ratios
  double beta_z = 0.0;
  double theta_x = 0.0;  // censoring log hazard ratios
  double theta_z = 0.0;
  BernoulliLaw x_law;
  SelectionLaw miss_law;
  std::string notes;  // e.g. how recalibrated intercepts were chosen
};

void validate(const Scenario& scenario);

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

// Both views of one simulated dataset: `full` has every x observed (the
// fully-observed analysis input); `observed` erases x where delta_x = 0.
struct GeneratedData {
  Dataset full;
  Dataset observed;

  double censoring_rate() const;
  double missing_rate() const;
};

GeneratedData generate_dataset(const Scenario& scenario, Rng& rng);

// Estimator grid of the simulation study. The first subscript says whether
// the x-prediction working model has the correct covariates, the second says
// the same for the missingness model.
enum class Method { FO, CC, AIPW_11, AIPW_12, AIPW_21, NNMI_11, NNMI_12, NNMI_21 };

std::string method_name(Method method);
std::optional<Method> parse_method(const std::string& name);
std::vector<Method> all_methods();

// Working-model covariate sets for a method's (M1, M2) pair.
struct WorkingSpecs {
  FeatureSpec covariate;  // M1: predicts x
  FeatureSpec selection;  // M2: predicts delta_x
};
WorkingSpecs working_specs(Method method);

struct MonteCarloOptions {
  int replicates = 500;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int aipw_n_boot = 500;
  int nnmi_nn = 5;
  double nnmi_w1 = 0.8;
  double nnmi_w2 = 0.2;
  int nnmi_m = 10;
};

struct MethodSummary {
  Method method = Method::FO;
  Eigen::VectorXd est_mean;      // per coefficient, x first then z
  Eigen::VectorXd sd_empirical;  // NaN when fewer than 2 usable replicates
  Eigen::VectorXd se_mean;
  Eigen::VectorXd coverage_rate;  // percent
  int divergence_count = 0;       // solver divergence, excluded from moments
  int failure_count = 0;          // other per-replicate failures (diagnostic)
  int n_used = 0;
};

struct MonteCarloSummary {
  Scenario scenario;
  int replicates = 0;
  std::uint64_t master_seed = 0;
  int aipw_n_boot = 0;
  std::vector<MethodSummary> methods;
  double censoring_rate = 0.0;  // mean realized rates over replicates
  double missing_rate = 0.0;
};

MonteCarloSummary run_monte_carlo(const Scenario& scenario,
                                  const std::vector<Method>& methods,
                                  const MonteCarloOptions& options);

// Study summary table: one row per (method, coefficient).
std::string summary_csv(const MonteCarloSummary& summary);
nlohmann::json summary_json(const MonteCarloSummary& summary);

// The built-in benchmark scenarios at n in {200, 400} plus their
// cloglog-link variants with recalibrated intercepts.
std::vector<Scenario> builtin_scenarios();

// Resolve a base scenario ("table4" or "table5") at sample size n with
// optional link overrides ("logit"/"cloglog", empty = scenario default).
Scenario make_scenario(const std::string& base, int n, const std::string& x_link = "",
                       const std::string& miss_link = "");

}  // namespace coxmi
