#include "coxmi/glm.hpp"

#include <cmath>

#include <Eigen/QR>

#include "coxmi/errors.hpp"

namespace coxmi {

namespace {

constexpr double kProbFloor = 1e-10;

double clamp_prob(double p) {
  if (p < kProbFloor) return kProbFloor;
  if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return p;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& design) {
  Eigen::MatrixXd x(design.rows(), design.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(design.cols()) = design;
  return x;
}

// Weighted least squares min ‖sqrt(W)(Xb − z)‖ with rank check.
Eigen::VectorXd solve_wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& w) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < x.cols()) {
    throw SingularMatrixError("glm: design matrix is rank deficient");
  }
  return qr.solve(sw.cwiseProduct(z));
}

Eigen::MatrixXd fisher_inverse(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd m = x.transpose() * w.asDiagonal() * x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success) {
    return Eigen::MatrixXd::Zero(x.cols(), x.cols());
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
}

GlmFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  GlmFit fit;
  fit.link = Link::Identity;
  fit.coef = solve_wls(x, y, ones);
  const Eigen::VectorXd resid = y - x * fit.coef;
  const double sigma2 = (n > p) ? resid.squaredNorm() / static_cast<double>(n - p) : 0.0;
  fit.covariance = sigma2 * fisher_inverse(x, ones);
  fit.converged = true;
  fit.n_iter = 1;
  return fit;
}

}  // namespace

double inverse_link(Link link, double eta) {
  switch (link) {
    case Link::Logit:
      return clamp_prob(1.0 / (1.0 + std::exp(-eta)));
    case Link::Cloglog:
      return clamp_prob(-std::expm1(-std::exp(eta)));
    case Link::Identity:
      return eta;
  }
  throw Error("glm: unknown link");
}

GlmFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               Link link, const GlmOptions& options) {
  if (design.rows() != response.size()) {
    throw DimensionMismatchError("glm: design rows != response length");
  }
  if (design.rows() < design.cols() + 1) {
    throw DimensionMismatchError("glm: need at least as many rows as coefficients");
  }
  const Eigen::MatrixXd x = with_intercept(design);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  // Up front rather than inside IRLS: a lucky zero score at the start would
  // otherwise return a fit with non-identified coefficients.
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(x).rank() < p) {
    throw SingularMatrixError("glm: design matrix is rank deficient");
  }

  if (link == Link::Identity) return fit_linear(x, response);

  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (response[i] == 0.0) {
      any0 = true;
    } else if (response[i] == 1.0) {
      any1 = true;
    } else {
      throw Error("glm: binary links require a 0/1 response");
    }
  }
  if (!any0 || !any1) {
    throw DegenerateOutcomeError("glm: response is constant");
  }

  GlmFit fit;
  fit.link = link;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd mu(n), dmu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = inverse_link(link, eta[i]);
      dmu[i] = (link == Link::Logit) ? mu[i] * (1.0 - mu[i])
                                     : std::exp(eta[i] - std::exp(eta[i]));
      if (dmu[i] < kProbFloor) dmu[i] = kProbFloor;
    }
    const Eigen::VectorXd var = mu.cwiseProduct(Eigen::VectorXd::Ones(n) - mu);
    w = dmu.cwiseProduct(dmu).cwiseQuotient(var);
    const Eigen::VectorXd score =
        x.transpose() * (dmu.cwiseProduct(response - mu).cwiseQuotient(var));
    fit.n_iter = iter;
    if (score.cwiseAbs().maxCoeff() < options.tol) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd z = eta + (response - mu).cwiseQuotient(dmu);
    beta = solve_wls(x, z, w);
    if (beta.cwiseAbs().maxCoeff() > options.separation_bound) {
      fit.converged = false;
      break;
    }
  }

  fit.coef = beta;
  fit.covariance = fisher_inverse(x, w);
  return fit;
}

double linear_predictor(const GlmFit& fit, const Eigen::VectorXd& row) {
  if (row.size() + 1 != fit.coef.size()) {
    throw DimensionMismatchError("glm: row length does not match coefficients");
  }
  return fit.coef[0] + fit.coef.tail(row.size()).dot(row);
}

double predict_prob(const GlmFit& fit, const Eigen::VectorXd& row) {
  if (fit.link == Link::Identity) {
    throw Error("glm: predict_prob requires a binary link");
  }
  return inverse_link(fit.link, linear_predictor(fit, row));
}

}  // namespace coxmi
