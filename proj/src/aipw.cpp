#include "coxmi/aipw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/LU>

#include "coxmi/errors.hpp"
#include "coxmi/parallel.hpp"
#include "coxmi/rng.hpp"

namespace coxmi {

namespace {

std::vector<int> all_rows(std::size_t n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Per-row constants of the estimating equation, independent of beta.
// Covariate order is (x, z...); z is centered for numerical stability, which
// leaves the equation's root unchanged.
struct EquationTerms {
  explicit EquationTerms(const Dataset& data, const AipwWorkingModels& models) {
    n = data.size();
    pz = z_dimension(data);
    if (!x_is_binary(data)) throw Error("aipw: x must be binary");
    time.resize(n);
    event.resize(n);
    w.resize(n);
    x.assign(n, 0.0);
    p.resize(n);
    z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pz));
    for (std::size_t i = 0; i < n; ++i) {
      const SurvivalRecord& r = data[i];
      time[i] = r.time;
      event[i] = r.event;
      w[i] = r.x_observed() ? 1.0 / models.pi[static_cast<Eigen::Index>(i)] : 0.0;
      if (r.x_observed()) x[i] = *r.x;
      p[i] = models.p[static_cast<Eigen::Index>(i)];
      for (std::size_t k = 0; k < pz; ++k) {
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r.z[k];
      }
    }
    z.rowwise() -= z.colwise().mean().eval();
    order = all_rows(n);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return time[a] < time[b]; });
  }

  std::size_t n = 0;
  std::size_t pz = 0;
  std::vector<double> time;
  std::vector<int> event;
  std::vector<double> w;  // delta_x / pi, zero for incomplete rows
  std::vector<double> x;
  std::vector<double> p;
  Eigen::MatrixXd z;
  std::vector<int> order;  // ascending by time
};

Eigen::VectorXd equation_at(const EquationTerms& t, const Eigen::VectorXd& beta) {
  const std::size_t pz = t.pz;
  const double ebx = std::exp(beta[0]);
  const Eigen::VectorXd bz = beta.tail(static_cast<Eigen::Index>(pz));
  const Eigen::VectorXd az = (t.z * bz).array().exp();

  Eigen::VectorXd u = Eigen::VectorXd::Zero(1 + static_cast<Eigen::Index>(pz));
  double r0 = 0.0;           // sum of mixed S^(0) terms over the risk set
  double r1x = 0.0;          // x component of the mixed S^(1) terms
  Eigen::VectorXd r1z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pz));

  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t.n) - 1;
  while (i >= 0) {
    const double tm = t.time[t.order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    while (j >= 0) {
      const int idx = t.order[static_cast<std::size_t>(j)];
      if (t.time[idx] != tm) break;
      const double a = az[idx];
      const double robs = t.w[idx] * a * (t.x[idx] == 1.0 ? ebx : 1.0);
      const double rexp = (1.0 - t.w[idx]) * a * (t.p[idx] * ebx + (1.0 - t.p[idx]));
      const double c0 = robs + rexp;
      r0 += c0;
      r1x += t.w[idx] * a * t.x[idx] * ebx + (1.0 - t.w[idx]) * a * t.p[idx] * ebx;
      r1z.noalias() += c0 * t.z.row(idx).transpose();
      --j;
    }
    int n_events = 0;
    for (std::ptrdiff_t k = j + 1; k <= i; ++k) {
      const int idx = t.order[static_cast<std::size_t>(k)];
      if (t.event[idx] != 1) continue;
      ++n_events;
      u[0] += t.w[idx] * t.x[idx] + (1.0 - t.w[idx]) * t.p[idx];
      u.tail(static_cast<Eigen::Index>(pz)).noalias() += t.z.row(idx).transpose();
    }
    if (n_events > 0) {
      u[0] -= n_events * r1x / r0;
      u.tail(static_cast<Eigen::Index>(pz)).noalias() -= (n_events / r0) * r1z;
    }
    i = j;
  }
  return u / static_cast<double>(t.n);
}

}  // namespace

AipwWorkingModels fit_working_models(const Dataset& data, const AipwSpecs& specs,
                                     const Eigen::VectorXd& cumhaz, double pi_floor) {
  const std::size_t n = data.size();
  if (cumhaz.size() != static_cast<Eigen::Index>(n)) {
    throw DimensionMismatchError("aipw: cumhaz length does not match dataset");
  }
  if (!x_is_binary(data)) throw Error("aipw: x must be binary");
  const std::vector<int> complete = complete_rows(data);
  if (complete.empty()) throw EmptyCompleteSetError("aipw: no complete rows");

  AipwWorkingModels models;

  const std::vector<int> rows = all_rows(n);
  Eigen::VectorXd delta_x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) delta_x[static_cast<Eigen::Index>(i)] = data[i].x_observed() ? 1.0 : 0.0;
  const Eigen::MatrixXd sel_design = working_design(data, rows, specs.selection, cumhaz);
  models.pi.resize(static_cast<Eigen::Index>(n));
  try {
    models.selection_model = fit_glm(sel_design, delta_x, Link::Logit);
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = predict_prob(models.selection_model, sel_design.row(static_cast<Eigen::Index>(i)).transpose());
      models.pi[static_cast<Eigen::Index>(i)] = std::max(pr, pi_floor);
    }
  } catch (const DegenerateOutcomeError&) {
    if (delta_x.minCoeff() < 1.0) throw;  // all-missing is not recoverable
    models.selection_degenerate = true;
    models.pi.setOnes();
  }

  Eigen::VectorXd x_obs(static_cast<Eigen::Index>(complete.size()));
  for (std::size_t i = 0; i < complete.size(); ++i) {
    x_obs[static_cast<Eigen::Index>(i)] = *data[static_cast<std::size_t>(complete[i])].x;
  }
  models.covariate_model =
      fit_glm(working_design(data, complete, specs.covariate, cumhaz), x_obs, Link::Logit);

  const Eigen::MatrixXd cov_design = working_design(data, rows, specs.covariate, cumhaz);
  models.p.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    models.p[static_cast<Eigen::Index>(i)] =
        predict_prob(models.covariate_model, cov_design.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return models;
}

AipwWorkingModels fit_working_models(const Dataset& data, const AipwSpecs& specs,
                                     double pi_floor) {
  return fit_working_models(data, specs, nelson_aalen_at_times(data), pi_floor);
}

Eigen::VectorXd aipw_equation(const Dataset& data, const AipwWorkingModels& models,
                              const Eigen::VectorXd& beta) {
  EquationTerms terms(data, models);
  if (beta.size() != 1 + static_cast<Eigen::Index>(terms.pz)) {
    throw DimensionMismatchError("aipw: beta length does not match covariates");
  }
  return equation_at(terms, beta);
}

AipwResult aipw_solve(const Dataset& data, const AipwWorkingModels& models,
                      const AipwOptions& options) {
  EquationTerms terms(data, models);
  const Eigen::Index p = 1 + static_cast<Eigen::Index>(terms.pz);

  AipwResult result;
  Eigen::VectorXd beta;
  if (options.init.size() != 0) {
    if (options.init.size() != p) {
      throw DimensionMismatchError("aipw: init length does not match covariates");
    }
    beta = options.init;
  } else {
    beta = Eigen::VectorXd::Zero(p);
  }

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    result.n_iter = iter;
    const Eigen::VectorXd u = equation_at(terms, beta);
    if (u.cwiseAbs().maxCoeff() < options.tol) {
      result.beta = beta;
      return result;
    }
    Eigen::MatrixXd jac(p, p);
    for (Eigen::Index c = 0; c < p; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(beta[c]));
      Eigen::VectorXd bp = beta, bm = beta;
      bp[c] += h;
      bm[c] -= h;
      jac.col(c) = (equation_at(terms, bp) - equation_at(terms, bm)) / (2.0 * h);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const Eigen::VectorXd step = lu.solve(-u);
    if (!step.allFinite()) {
      throw SingularMatrixError("aipw: singular Jacobian");
    }
    const double norm = step.cwiseAbs().maxCoeff();
    beta += (norm > options.max_step) ? (options.max_step / norm) * step : step;
    if (beta.cwiseAbs().maxCoeff() > options.divergence_bound) {
      result.beta = beta;
      result.diverged = true;
      return result;
    }
  }
  result.beta = beta;
  result.diverged = true;
  return result;
}

AipwResult aipw_bootstrap_se(const Dataset& data, const AipwSpecs& specs,
                             int n_boot, std::uint64_t seed, unsigned workers,
                             const AipwOptions& options) {
  if (n_boot < 2) throw ConfigError("aipw: n_boot must be at least 2");
  const Eigen::VectorXd cumhaz = nelson_aalen_at_times(data);
  const AipwWorkingModels models = fit_working_models(data, specs, cumhaz, options.pi_floor);
  AipwResult result = aipw_solve(data, models, options);
  if (result.diverged) return result;

  const std::size_t n = data.size();
  std::vector<Eigen::VectorXd> betas(static_cast<std::size_t>(n_boot));
  std::vector<char> ok(static_cast<std::size_t>(n_boot), 0);

  AipwOptions boot_options = options;
  boot_options.init = result.beta;

  parallel_for(static_cast<std::size_t>(n_boot), workers, [&](std::size_t b) {
    Rng rng(derive_seed(seed, "aipw_boot", b));
    Dataset sample(n);
    Eigen::VectorXd sample_cumhaz(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = rng.uniform_index(n);
      sample[i] = data[idx];
      sample_cumhaz[static_cast<Eigen::Index>(i)] = cumhaz[static_cast<Eigen::Index>(idx)];
    }
    try {
      const AipwWorkingModels boot_models =
          fit_working_models(sample, specs, sample_cumhaz, options.pi_floor);
      const AipwResult fit = aipw_solve(sample, boot_models, boot_options);
      if (!fit.diverged) {
        betas[b] = fit.beta;
        ok[b] = 1;
      }
    } catch (const Error&) {
      // degenerate resample (constant outcome, singular fit, ...): counted below
    }
  });

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(result.beta.size());
  int n_ok = 0;
  for (int b = 0; b < n_boot; ++b) {
    if (!ok[static_cast<std::size_t>(b)]) continue;
    mean += betas[static_cast<std::size_t>(b)];
    ++n_ok;
  }
  result.n_boot_failures = n_boot - n_ok;
  if (result.n_boot_failures > n_boot / 2 || n_ok < 2) {
    throw TooManyFailuresError("aipw: " + std::to_string(result.n_boot_failures) +
                               " of " + std::to_string(n_boot) +
                               " bootstrap resamples failed");
  }
  mean /= n_ok;
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(result.beta.size());
  for (int b = 0; b < n_boot; ++b) {
    if (!ok[static_cast<std::size_t>(b)]) continue;
    ss += (betas[static_cast<std::size_t>(b)] - mean).cwiseAbs2();
  }
  result.se = (ss / (n_ok - 1)).cwiseSqrt();
  return result;
}

}  // namespace coxmi
