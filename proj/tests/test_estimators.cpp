#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "coxmi/aipw.hpp"
#include "coxmi/complete_case.hpp"
#include "coxmi/cox.hpp"
#include "coxmi/dataset.hpp"
#include "coxmi/errors.hpp"
#include "coxmi/rng.hpp"
#include "coxmi/simulation.hpp"

using namespace coxmi;

namespace {

constexpr double kLog2 = 0.6931471805599453;

SurvivalRecord rec(double t, int d, std::optional<double> x, std::vector<double> z) {
  SurvivalRecord r;
  r.time = t;
  r.event = d;
  r.x = x;
  r.z = std::move(z);
  return r;
}

Dataset observed(const std::string& base, int n, std::uint64_t seed) {
  const Scenario sc = make_scenario(base, n);
  Rng rng(seed);
  return generate_dataset(sc, rng).observed;
}

AipwSpecs specs_for(Method m) {
  const WorkingSpecs ws = working_specs(m);
  return AipwSpecs{ws.covariate, ws.selection};
}

Eigen::VectorXd solve_beta(const Dataset& data, const AipwSpecs& specs) {
  const AipwWorkingModels models = fit_working_models(data, specs);
  const AipwResult r = aipw_solve(data, models);
  REQUIRE_FALSE(r.diverged);
  return r.beta;
}

}  // namespace

TEST_CASE("feature rows follow the declared layout") {
  const SurvivalRecord r = rec(2.0, 1, 0.5, {0.3, 0.7});
  const Eigen::VectorXd a = feature_row(r, 1.1, {Feature::Z, Feature::Event, Feature::CumHazard});
  REQUIRE(a.size() == 4);
  CHECK(a[0] == 0.3);
  CHECK(a[1] == 0.7);
  CHECK(a[2] == 1.0);
  CHECK(a[3] == 1.1);
  const Eigen::VectorXd b = feature_row(r, 1.1, {Feature::Z, Feature::Time});
  REQUIRE(b.size() == 3);
  CHECK(b[2] == 2.0);
}

TEST_CASE("row bookkeeping splits complete and missing rows") {
  const Dataset data = {rec(1, 1, 1.0, {0.2}), rec(2, 0, std::nullopt, {0.4}),
                        rec(3, 1, 0.0, {0.6}), rec(4, 1, std::nullopt, {0.8})};
  CHECK(complete_rows(data) == std::vector<int>{0, 2});
  CHECK(missing_rows(data) == std::vector<int>{1, 3});
  CHECK(x_is_binary(data));
  const Dataset cont = {rec(1, 1, 1.5, {0.2}), rec(2, 1, 0.0, {0.4})};
  CHECK_FALSE(x_is_binary(cont));
  const Dataset none = {rec(1, 1, std::nullopt, {0.2}), rec(2, 1, std::nullopt, {0.4})};
  CHECK_THROWS_AS(design_complete_cases(none), EmptyCompleteSetError);
}

TEST_CASE("marginal hazard at subject times matches the step function") {
  const Dataset data = observed("table4", 80, 17);
  const Eigen::VectorXd at_times = nelson_aalen_at_times(data);
  CoxData all;
  const auto n = static_cast<Eigen::Index>(data.size());
  all.time.resize(n);
  all.event.resize(n);
  all.covariates.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    all.time[i] = data[static_cast<std::size_t>(i)].time;
    all.event[i] = data[static_cast<std::size_t>(i)].event;
    all.covariates(i, 0) = data[static_cast<std::size_t>(i)].z[0];
  }
  const StepFunction h = nelson_aalen(all);
  for (Eigen::Index i = 0; i < n; ++i)
    CHECK(at_times[i] == doctest::Approx(h(all.time[i])).epsilon(1e-14));
}

TEST_CASE("complete-case fit equals a full fit of the complete rows") {
  const Dataset data = observed("table4", 250, 21);
  Dataset subset;
  for (const auto& r : data)
    if (r.x_observed()) subset.push_back(r);
  REQUIRE(subset.size() < data.size());

  const CoxFit cc = fit_complete_case(data);
  const CoxFit full = fit_cox(design_full(subset));
  REQUIRE(cc.converged);
  for (int k = 0; k < 2; ++k)
    CHECK(cc.beta[k] == doctest::Approx(full.beta[k]).epsilon(1e-12));
}

TEST_CASE("fully observed data: complete case and aipw reduce to the full fit") {
  const Scenario sc = make_scenario("table4", 300);
  Rng rng(4);
  const GeneratedData gen = generate_dataset(sc, rng);
  const Dataset& full = gen.full;

  const CoxFit fo = fit_cox(design_full(full));
  const CoxFit cc = fit_complete_case(full);
  for (int k = 0; k < 2; ++k)
    CHECK(cc.beta[k] == doctest::Approx(fo.beta[k]).epsilon(1e-12));

  const AipwWorkingModels models = fit_working_models(full, specs_for(Method::AIPW_11));
  CHECK(models.selection_degenerate);
  CHECK(models.pi.minCoeff() == 1.0);
  CHECK(models.pi.maxCoeff() == 1.0);

  // With every weight equal to one the estimating equation is the scaled Cox
  // score, so the roots agree.
  CHECK(aipw_equation(full, models, fo.beta).cwiseAbs().maxCoeff() < 1e-8);
  const AipwResult aipw = aipw_solve(full, models);
  REQUIRE_FALSE(aipw.diverged);
  for (int k = 0; k < 2; ++k)
    CHECK(aipw.beta[k] == doctest::Approx(fo.beta[k]).epsilon(1e-6));
}

TEST_CASE("the estimating equation vanishes at the reported root") {
  const Dataset data = observed("table4", 400, 12);
  const AipwWorkingModels models = fit_working_models(data, specs_for(Method::AIPW_11));
  const AipwResult r = aipw_solve(data, models);
  REQUIRE_FALSE(r.diverged);
  CHECK(aipw_equation(data, models, r.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("selection model recovers the generating missingness coefficients") {
  const Dataset data = observed("table4", 20000, 8);
  const AipwWorkingModels models = fit_working_models(data, specs_for(Method::AIPW_11));
  // delta_x ~ Bernoulli(1/(1+exp(1.5 + 0.5 z - 2 y))), i.e. a logistic model
  // with coefficients (-1.5, -0.5, +2) on (1, z, y).
  REQUIRE(models.selection_model.coef.size() == 3);
  CHECK(std::abs(models.selection_model.coef[0] - (-1.5)) < 0.1);
  CHECK(std::abs(models.selection_model.coef[1] - (-0.5)) < 0.1);
  CHECK(std::abs(models.selection_model.coef[2] - 2.0) < 0.1);
}

TEST_CASE("selection probabilities respect the configured floor") {
  const Dataset data = observed("table4", 500, 31);
  const AipwWorkingModels lo = fit_working_models(data, specs_for(Method::AIPW_11), 0.01);
  CHECK(lo.pi.minCoeff() >= 0.01);
  CHECK(lo.pi.maxCoeff() <= 1.0);
  const AipwWorkingModels hi = fit_working_models(data, specs_for(Method::AIPW_11), 0.4);
  CHECK(hi.pi.minCoeff() >= 0.4);
}

TEST_CASE("missingness independent of outcome leaves the complete case consistent") {
  Scenario sc = make_scenario("table4", 8000);
  sc.miss_law.e0 = 0.5;
  sc.miss_law.ez = 1.0;
  sc.miss_law.ey = 0.0;  // missing at random given z alone
  Rng rng(2024);
  const Dataset data = generate_dataset(sc, rng).observed;
  const CoxFit cc = fit_complete_case(data);
  CHECK(std::abs(cc.beta[0] - kLog2) < 0.1);
  CHECK(std::abs(cc.beta[1] + kLog2) < 0.25);
}

TEST_CASE("outcome-dependent missingness biases the complete case but not aipw") {
  const Dataset data = observed("table4", 20000, 77);

  const CoxFit cc = fit_complete_case(data);
  // The z coefficient absorbs the selection effect; its limit is far from
  // the generating value.
  CHECK(std::abs(cc.beta[1] - (-kLog2)) > 0.15);

  const Eigen::VectorXd both = solve_beta(data, specs_for(Method::AIPW_11));
  CHECK(std::abs(both[0] - kLog2) < 0.15);
  CHECK(std::abs(both[1] + kLog2) < 0.2);
}

TEST_CASE("either correct working model restores consistency") {
  const Dataset data = observed("table4", 20000, 313);
  // Correct covariate model, selection model missing the outcome term.
  const Eigen::VectorXd m2_wrong = solve_beta(data, specs_for(Method::AIPW_12));
  CHECK(std::abs(m2_wrong[0] - kLog2) < 0.2);
  CHECK(std::abs(m2_wrong[1] + kLog2) < 0.25);
  // Covariate model missing the hazard term, correct selection model.
  const Eigen::VectorXd m1_wrong = solve_beta(data, specs_for(Method::AIPW_21));
  CHECK(std::abs(m1_wrong[0] - kLog2) < 0.2);
  CHECK(std::abs(m1_wrong[1] + kLog2) < 0.25);
}

TEST_CASE("two bootstrap resamples match the closed-form spread") {
  const Dataset data = observed("table4", 150, 52);
  const std::uint64_t seed = 9001;
  const AipwSpecs specs = specs_for(Method::AIPW_11);

  const AipwResult r = aipw_bootstrap_se(data, specs, 2, seed);
  REQUIRE_FALSE(r.diverged);
  REQUIRE(r.n_boot_failures == 0);

  // Replay the documented resampling scheme: resample b draws n row indices
  // from Rng(derive_seed(seed, "aipw_boot", b)) and inherits the original
  // cumulative hazard by row.
  const Eigen::VectorXd cumhaz = nelson_aalen_at_times(data);
  const AipwWorkingModels point_models = fit_working_models(data, specs);
  AipwOptions boot_options;
  boot_options.init = aipw_solve(data, point_models).beta;

  std::vector<Eigen::VectorXd> betas;
  for (std::uint64_t b = 0; b < 2; ++b) {
    Rng rng(derive_seed(seed, "aipw_boot", b));
    Dataset sample(data.size());
    Eigen::VectorXd sample_cumhaz(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = rng.uniform_index(data.size());
      sample[i] = data[idx];
      sample_cumhaz[static_cast<Eigen::Index>(i)] = cumhaz[static_cast<Eigen::Index>(idx)];
    }
    const AipwWorkingModels models = fit_working_models(sample, specs, sample_cumhaz);
    const AipwResult fit = aipw_solve(sample, models, boot_options);
    REQUIRE_FALSE(fit.diverged);
    betas.push_back(fit.beta);
  }
  for (int k = 0; k < 2; ++k) {
    const double expected = std::abs(betas[0][k] - betas[1][k]) / std::sqrt(2.0);
    CHECK(r.se[k] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("bootstrap standard errors are reproducible under the seed") {
  const Dataset data = observed("table4", 120, 64);
  const AipwSpecs specs = specs_for(Method::AIPW_11);
  const AipwResult a = aipw_bootstrap_se(data, specs, 20, 5150);
  const AipwResult b = aipw_bootstrap_se(data, specs, 20, 5150);
  CHECK(a.se == b.se);
  CHECK(a.beta == b.beta);
  const AipwResult c = aipw_bootstrap_se(data, specs, 20, 5151);
  CHECK(a.se != c.se);
}

TEST_CASE("worker count does not change bootstrap results") {
  const Dataset data = observed("table4", 120, 64);
  const AipwSpecs specs = specs_for(Method::AIPW_11);
  const AipwResult serial = aipw_bootstrap_se(data, specs, 16, 7, 1);
  const AipwResult threaded = aipw_bootstrap_se(data, specs, 16, 7, 4);
  CHECK(serial.se == threaded.se);
  CHECK(serial.beta == threaded.beta);
}

TEST_CASE("divergence is reported rather than thrown") {
  // Monotone risk ordering: subjects with x = 1 all fail before any subject
  // with x = 0, so the root runs away and Newton hits the coefficient bound.
  const Dataset data = {rec(1, 1, 1.0, {0.1}), rec(2, 1, 1.0, {0.5}),
                        rec(3, 1, 1.0, {0.3}), rec(4, 1, 0.0, {0.9}),
                        rec(5, 1, 0.0, {0.2}), rec(6, 0, 0.0, {0.7})};
  const AipwWorkingModels models = fit_working_models(data, specs_for(Method::AIPW_11));
  const AipwResult r = aipw_solve(data, models);
  CHECK(r.diverged);
  const AipwResult boot = aipw_bootstrap_se(data, specs_for(Method::AIPW_11), 4, 1);
  CHECK(boot.diverged);
  CHECK(boot.se.size() == 0);
}

TEST_CASE("excess bootstrap failures surface as an error") {
  // Three complete rows; most resamples lose enough of them that the
  // working-model fits degenerate. Under this seed both resamples fail.
  const Dataset data = {
      rec(1.0, 1, 0.0, {0.2}),           rec(2.0, 1, 1.0, {0.8}),
      rec(3.0, 0, 1.0, {0.5}),           rec(1.5, 1, std::nullopt, {0.3}),
      rec(2.5, 0, std::nullopt, {0.6}),  rec(3.5, 1, std::nullopt, {0.9}),
      rec(4.0, 1, std::nullopt, {0.1}),  rec(4.5, 0, std::nullopt, {0.4}),
      rec(5.0, 1, std::nullopt, {0.7}),  rec(5.5, 1, std::nullopt, {0.55})};
  AipwSpecs small;
  small.covariate = {Feature::Z};
  small.selection = {Feature::Z};
  // The point fit itself succeeds.
  const AipwResult point = aipw_solve(data, fit_working_models(data, small));
  REQUIRE_FALSE(point.diverged);
  CHECK_THROWS_AS(aipw_bootstrap_se(data, small, 2, 4), TooManyFailuresError);
}

TEST_CASE("configuration and degeneracy errors") {
  const Dataset data = observed("table4", 60, 3);
  CHECK_THROWS_AS(aipw_bootstrap_se(data, specs_for(Method::AIPW_11), 1, 9),
                  ConfigError);
  Dataset all_missing;
  for (auto r : data) {
    r.x.reset();
    all_missing.push_back(r);
  }
  CHECK_THROWS_AS(fit_working_models(all_missing, specs_for(Method::AIPW_11)),
                  EmptyCompleteSetError);
}
