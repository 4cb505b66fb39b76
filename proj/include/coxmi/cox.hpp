#pragma once

#include <Eigen/Dense>

#include "coxmi/dataset.hpp"
#include "coxmi/step_function.hpp"

namespace coxmi {

struct CoxOptions {
  int max_iter = 100;
  double tol = 1e-8;               // on the max-norm of the score
  double divergence_bound = 10.0;  // on the max-norm of beta
  Eigen::VectorXd init;            // size 0 => zeros
};

struct ScoreInfo {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;  // negative Hessian, symmetric
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // inverse observed information
  double loglik = 0.0;
  bool converged = false;
  int n_iter = 0;
  StepFunction baseline_cumhaz;  // Breslow estimate at beta
};

// Log partial likelihood with Breslow handling of tied event times. Optional
// per-subject weights multiply both the event terms and the risk sums.
double partial_loglik(const CoxData& data, const Eigen::VectorXd& beta);

ScoreInfo score_and_info(const CoxData& data, const Eigen::VectorXd& beta);

// Newton-Raphson with step-halving when the log-likelihood decreases.
// Throws DivergedError when the coefficient bound is exceeded or iterations
// run out, SingularMatrixError when the information matrix is singular.
CoxFit fit_cox(const CoxData& data, const CoxOptions& options = {});

// Marginal Nelson-Aalen estimate: jump d_t / n_t at each event time.
StepFunction nelson_aalen(const Eigen::VectorXd& time, const Eigen::VectorXi& event);
StepFunction nelson_aalen(const CoxData& data);

// Breslow baseline cumulative hazard at beta: jump d_t / sum_{at risk} w r.
StepFunction breslow_cumhaz(const CoxData& data, const Eigen::VectorXd& beta);

}  // namespace coxmi
