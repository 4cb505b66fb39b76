#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "coxmi/dataset.hpp"
#include "coxmi/glm.hpp"

namespace coxmi {

// Covariates entering the two working models. Defaults are the "both
// correct" configuration: X predicted from (Z, event, H0(Y)), selection
// predicted from (Z, Y).
struct AipwSpecs {
  FeatureSpec covariate = {Feature::Z, Feature::Event, Feature::CumHazard};
  FeatureSpec selection = {Feature::Z, Feature::Time};
};

struct AipwOptions {
  int max_iter = 100;
  double tol = 1e-8;               // on the max-norm of U/n
  double divergence_bound = 10.0;  // on the max-norm of beta
  double max_step = 2.0;           // Newton step cap, max-norm
  double pi_floor = 0.01;
  Eigen::VectorXd init;            // size 0 => zeros
};

struct AipwWorkingModels {
  GlmFit selection_model;  // Pr(delta_x = 1 | spec_selection), logit
  GlmFit covariate_model;  // Pr(X = 1 | spec_covariate), logit, complete rows
  bool selection_degenerate = false;  // delta_x identically 1 -> pi == 1
  Eigen::VectorXd pi;  // per-row selection probability, floored
  Eigen::VectorXd p;   // per-row Pr(X = 1 | observed data)
};

struct AipwResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;  // bootstrap; empty until aipw_bootstrap_se
  bool diverged = false;
  int n_boot_failures = 0;
  int n_iter = 0;
};

// Fits the selection model on all rows (response delta_x) and the covariate
// model on complete rows (response x). cumhaz holds H0 evaluated at each
// row's time; the first overload computes it from the dataset itself, the
// second lets bootstrap resamples inherit the original-sample estimate.
AipwWorkingModels fit_working_models(const Dataset& data, const AipwSpecs& specs,
                                     const Eigen::VectorXd& cumhaz,
                                     double pi_floor = 0.01);
AipwWorkingModels fit_working_models(const Dataset& data, const AipwSpecs& specs,
                                     double pi_floor = 0.01);

// Newton root of the augmented IPW estimating equation with a central
// finite-difference Jacobian. Divergence is recorded, not thrown; a singular
// Jacobian throws SingularMatrixError.
AipwResult aipw_solve(const Dataset& data, const AipwWorkingModels& models,
                      const AipwOptions& options = {});

// Residual of the estimating equation, scaled by 1/n (exposed for testing).
Eigen::VectorXd aipw_equation(const Dataset& data, const AipwWorkingModels& models,
                              const Eigen::VectorXd& beta);

// Point estimate on the full data plus bootstrap standard errors over n_boot
// resamples. Resamples whose fit fails or diverges are dropped and counted;
// more than n_boot/2 failures throws TooManyFailuresError.
AipwResult aipw_bootstrap_se(const Dataset& data, const AipwSpecs& specs,
                             int n_boot, std::uint64_t seed,
                             unsigned workers = 1, const AipwOptions& options = {});

}  // namespace coxmi
