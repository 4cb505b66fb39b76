#pragma once

#include <Eigen/Dense>

namespace coxmi {

enum class Link { Logit, Cloglog, Identity };

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-8;
  // IRLS iterates whose coefficients exceed this bound are treated as
  // separated; the fit is returned with converged = false rather than thrown,
  // so callers doing repeated simulation can count failures.
  double separation_bound = 15.0;
};

struct GlmFit {
  Eigen::VectorXd coef;  // intercept first
  Link link = Link::Logit;
  bool converged = false;
  Eigen::MatrixXd covariance;
  int n_iter = 0;
};

// Inverse link on the mean scale; probabilities are clamped to
// [1e-10, 1 - 1e-10] for the binary links.
double inverse_link(Link link, double eta);

// design carries no intercept column; one is prepended internally.
GlmFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               Link link, const GlmOptions& options = {});

double linear_predictor(const GlmFit& fit, const Eigen::VectorXd& row);
double predict_prob(const GlmFit& fit, const Eigen::VectorXd& row);

}  // namespace coxmi
