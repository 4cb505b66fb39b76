#include "coxmi/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>

#include "coxmi/errors.hpp"

namespace coxmi {

namespace {

// Shared state for repeated evaluations at different beta. Covariates are
// centered to keep exp() arguments small; the partial likelihood, score and
// information are invariant to that shift.
struct Workspace {
  explicit Workspace(const CoxData& data) : data(data) {
    validate(data);
    const Eigen::Index n = data.n();
    weights = data.weights.size() == 0 ? Eigen::VectorXd::Ones(n) : data.weights;
    means = data.covariates.colwise().mean();
    centered = data.covariates.rowwise() - means;
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return data.time[a] < data.time[b];
    });
  }

  const CoxData& data;
  Eigen::VectorXd weights;
  Eigen::RowVectorXd means;
  Eigen::MatrixXd centered;
  std::vector<int> order;  // ascending by time
};

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

Evaluation evaluate(const Workspace& ws, const Eigen::VectorXd& beta,
                    bool want_score, bool want_info) {
  const Eigen::Index n = ws.data.n();
  const Eigen::Index p = ws.data.p();
  const Eigen::VectorXd eta = ws.centered * beta;

  Evaluation out;
  if (want_score) out.score = Eigen::VectorXd::Zero(p);
  if (want_info) out.information = Eigen::MatrixXd::Zero(p, p);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  // Scan from the largest time downward; subjects enter the risk sums as the
  // current event time decreases past their observed time.
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(n) - 1;
  while (i >= 0) {
    const double t = ws.data.time[ws.order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    while (j >= 0) {
      const int idx = ws.order[static_cast<std::size_t>(j)];
      if (ws.data.time[idx] != t) break;
      const double r = ws.weights[idx] * std::exp(eta[idx]);
      s0 += r;
      if (want_score || want_info) {
        s1.noalias() += r * ws.centered.row(idx).transpose();
      }
      if (want_info) {
        s2.noalias() += r * ws.centered.row(idx).transpose() * ws.centered.row(idx);
      }
      --j;
    }
    // Breslow: all events tied at t share the same risk sums.
    double event_weight = 0.0;
    for (std::ptrdiff_t k = j + 1; k <= i; ++k) {
      const int idx = ws.order[static_cast<std::size_t>(k)];
      if (ws.data.event[idx] != 1) continue;
      const double w = ws.weights[idx];
      event_weight += w;
      out.loglik += w * eta[idx];
      if (want_score) out.score.noalias() += w * ws.centered.row(idx).transpose();
    }
    if (event_weight > 0.0) {
      out.loglik -= event_weight * std::log(s0);
      if (want_score || want_info) {
        const Eigen::VectorXd xbar = s1 / s0;
        if (want_score) out.score.noalias() -= event_weight * xbar;
        if (want_info) {
          out.information.noalias() += event_weight * (s2 / s0 - xbar * xbar.transpose());
        }
      }
    }
    i = j;
  }
  return out;
}

void check_beta_size(const CoxData& data, const Eigen::VectorXd& beta) {
  if (beta.size() != data.p()) {
    throw DimensionMismatchError("cox: beta length does not match covariate count");
  }
}

StepFunction cumhaz_scan(const CoxData& data, const Eigen::VectorXd* beta,
                         bool use_weights) {
  validate(data);
  const Eigen::Index n = data.n();
  Eigen::VectorXd w = (use_weights && data.weights.size() != 0)
                          ? data.weights
                          : Eigen::VectorXd::Ones(n);

  Eigen::RowVectorXd means;
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double uncenter = 1.0;
  if (beta != nullptr) {
    check_beta_size(data, *beta);
    means = data.covariates.colwise().mean();
    eta = (data.covariates.rowwise() - means) * (*beta);
    uncenter = std::exp(-means.dot(*beta));
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return data.time[a] < data.time[b]; });

  std::vector<double> knots, jumps;
  double s0 = 0.0;
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(n) - 1;
  while (i >= 0) {
    const double t = data.time[order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    while (j >= 0) {
      const int idx = order[static_cast<std::size_t>(j)];
      if (data.time[idx] != t) break;
      s0 += (beta != nullptr) ? w[idx] * std::exp(eta[idx]) : w[idx];
      --j;
    }
    double event_weight = 0.0;
    for (std::ptrdiff_t k = j + 1; k <= i; ++k) {
      const int idx = order[static_cast<std::size_t>(k)];
      if (data.event[idx] == 1) event_weight += w[idx];
    }
    if (event_weight > 0.0) {
      knots.push_back(t);
      jumps.push_back(event_weight / s0 * uncenter);
    }
    i = j;
  }
  std::reverse(knots.begin(), knots.end());
  std::reverse(jumps.begin(), jumps.end());
  std::vector<double> values(jumps.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    acc += jumps[k];
    values[k] = acc;
  }
  return StepFunction(std::move(knots), std::move(values));
}

}  // namespace

double partial_loglik(const CoxData& data, const Eigen::VectorXd& beta) {
  check_beta_size(data, beta);
  Workspace ws(data);
  return evaluate(ws, beta, false, false).loglik;
}

ScoreInfo score_and_info(const CoxData& data, const Eigen::VectorXd& beta) {
  check_beta_size(data, beta);
  Workspace ws(data);
  Evaluation ev = evaluate(ws, beta, true, true);
  return ScoreInfo{std::move(ev.score), std::move(ev.information)};
}

CoxFit fit_cox(const CoxData& data, const CoxOptions& options) {
  Workspace ws(data);
  const Eigen::Index p = data.p();
  for (Eigen::Index c = 0; c < p; ++c) {
    const Eigen::VectorXd col = data.covariates.col(c);
    if (col.maxCoeff() == col.minCoeff()) {
      throw SingularMatrixError("cox: constant covariate column " + std::to_string(c));
    }
  }

  Eigen::VectorXd beta;
  if (options.init.size() != 0) {
    check_beta_size(data, options.init);
    beta = options.init;
  } else {
    beta = Eigen::VectorXd::Zero(p);
  }

  Evaluation ev = evaluate(ws, beta, true, true);
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (ev.score.cwiseAbs().maxCoeff() < options.tol) {
      converged = true;
      break;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(ev.information);
    if (llt.info() != Eigen::Success) {
      throw SingularMatrixError("cox: singular information matrix");
    }
    const Eigen::VectorXd step = llt.solve(ev.score);

    double scale = 1.0;
    Eigen::VectorXd candidate;
    Evaluation cand_ev;
    // Slack scales with |loglik|: near the optimum the change in the
    // objective is below summation noise, which grows with its magnitude.
    const double slack = 1e-9 * std::max(1.0, std::abs(ev.loglik));
    for (int h = 0; h < 30; ++h) {
      candidate = beta + scale * step;
      cand_ev = evaluate(ws, candidate, true, true);
      if (cand_ev.loglik >= ev.loglik - slack) break;
      scale *= 0.5;
    }
    beta = candidate;
    ev = std::move(cand_ev);
    if (beta.cwiseAbs().maxCoeff() > options.divergence_bound) {
      throw DivergedError("cox: coefficient bound exceeded");
    }
  }
  if (!converged) throw DivergedError("cox: maximum iterations reached");

  Eigen::LLT<Eigen::MatrixXd> llt(ev.information);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("cox: singular information matrix at the optimum");
  }
  Eigen::MatrixXd covariance = llt.solve(Eigen::MatrixXd::Identity(p, p));
  covariance = ((covariance + covariance.transpose()) / 2.0).eval();

  CoxFit fit;
  fit.beta = std::move(beta);
  fit.covariance = std::move(covariance);
  fit.loglik = ev.loglik;
  fit.converged = true;
  fit.n_iter = iter;
  fit.baseline_cumhaz = breslow_cumhaz(data, fit.beta);
  return fit;
}

StepFunction nelson_aalen(const Eigen::VectorXd& time, const Eigen::VectorXi& event) {
  CoxData data;
  data.time = time;
  data.event = event;
  data.covariates.resize(time.size(), 0);
  return cumhaz_scan(data, nullptr, false);
}

StepFunction nelson_aalen(const CoxData& data) {
  return nelson_aalen(data.time, data.event);
}

StepFunction breslow_cumhaz(const CoxData& data, const Eigen::VectorXd& beta) {
  return cumhaz_scan(data, &beta, true);
}

}  // namespace coxmi
