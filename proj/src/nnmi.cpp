#include "coxmi/nnmi.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "coxmi/errors.hpp"
#include "coxmi/parallel.hpp"

namespace coxmi {

namespace {

double score_mean(const Eigen::VectorXd& v) { return v.mean(); }

double score_sd(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1));
}

double standardize(double raw, double mean, double sd, const char* which) {
  if (!(sd > 0.0)) {
    throw DegenerateScoreError(std::string("nnmi: ") + which +
                               " score is constant in the bootstrap sample");
  }
  return (raw - mean) / sd;
}

}  // namespace

void validate(const ImputationConfig& config) {
  if (config.w1 < 0.0 || config.w2 < 0.0 || std::abs(config.w1 + config.w2 - 1.0) > 1e-9) {
    throw ConfigError("nnmi: weights must be nonnegative and sum to one");
  }
  if (config.nn < 1) throw ConfigError("nnmi: nn must be at least 1");
  if (config.m < 2) throw ConfigError("nnmi: m must be at least 2");
  if (config.max_redraws < 0) throw ConfigError("nnmi: max_redraws must be nonnegative");
}

ScoreModels fit_score_models(const Dataset& bootstrap_sample, const FeatureSpec& spec_x,
                             const FeatureSpec& spec_miss, const Eigen::VectorXd& cumhaz) {
  const std::size_t n = bootstrap_sample.size();
  if (cumhaz.size() != static_cast<Eigen::Index>(n)) {
    throw DimensionMismatchError("nnmi: cumhaz length does not match sample");
  }
  const std::vector<int> complete = complete_rows(bootstrap_sample);
  if (complete.empty()) throw EmptyCompleteSetError("nnmi: bootstrap sample has no complete rows");

  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  Eigen::VectorXd x_obs(static_cast<Eigen::Index>(complete.size()));
  for (std::size_t i = 0; i < complete.size(); ++i) {
    x_obs[static_cast<Eigen::Index>(i)] = *bootstrap_sample[static_cast<std::size_t>(complete[i])].x;
  }
  Eigen::VectorXd delta_x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    delta_x[static_cast<Eigen::Index>(i)] = bootstrap_sample[i].x_observed() ? 1.0 : 0.0;
  }

  ScoreModels models;
  models.spec_x = spec_x;
  models.spec_miss = spec_miss;
  const Link x_link = x_is_binary(bootstrap_sample) ? Link::Logit : Link::Identity;
  // Separated fits are kept: the models only rank donors, and a fit stopped
  // at the separation bound still orders the scores. Real degeneracy is a
  // constant score, checked below.
  models.x_model =
      fit_glm(working_design(bootstrap_sample, complete, spec_x, cumhaz), x_obs, x_link);
  models.miss_model =
      fit_glm(working_design(bootstrap_sample, rows, spec_miss, cumhaz), delta_x, Link::Logit);

  Eigen::VectorXd raw_x(static_cast<Eigen::Index>(n)), raw_miss(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const SurvivalRecord& rec = bootstrap_sample[i];
    const double h = cumhaz[static_cast<Eigen::Index>(i)];
    raw_x[static_cast<Eigen::Index>(i)] = linear_predictor(models.x_model, feature_row(rec, h, spec_x));
    raw_miss[static_cast<Eigen::Index>(i)] =
        linear_predictor(models.miss_model, feature_row(rec, h, spec_miss));
  }
  models.standardizers.mean_x = score_mean(raw_x);
  models.standardizers.sd_x = score_sd(raw_x);
  models.standardizers.mean_miss = score_mean(raw_miss);
  models.standardizers.sd_miss = score_sd(raw_miss);
  if (!(models.standardizers.sd_x > 0.0) || !(models.standardizers.sd_miss > 0.0)) {
    throw DegenerateScoreError("nnmi: raw score is constant in the bootstrap sample");
  }
  return models;
}

ScorePair score_original(const SurvivalRecord& record, const ScoreModels& models,
                         double cumhaz) {
  const double raw_x = linear_predictor(models.x_model, feature_row(record, cumhaz, models.spec_x));
  const double raw_miss =
      linear_predictor(models.miss_model, feature_row(record, cumhaz, models.spec_miss));
  ScorePair s;
  s.s_x = standardize(raw_x, models.standardizers.mean_x, models.standardizers.sd_x, "x");
  s.s_miss =
      standardize(raw_miss, models.standardizers.mean_miss, models.standardizers.sd_miss, "miss");
  return s;
}

double nn_distance(const ScorePair& a, const ScorePair& b, double w1, double w2) {
  const double dx = a.s_x - b.s_x;
  const double dm = a.s_miss - b.s_miss;
  return std::sqrt(w1 * dx * dx + w2 * dm * dm);
}

std::vector<int> select_imputing_set(const ScorePair& target,
                                     const std::vector<std::pair<int, ScorePair>>& donors,
                                     int nn, double w1, double w2) {
  if (donors.empty()) throw EmptyDonorPoolError("nnmi: no donors available");
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(donors.size());
  for (const auto& [idx, score] : donors) {
    ranked.emplace_back(nn_distance(target, score, w1, w2), idx);
  }
  std::sort(ranked.begin(), ranked.end());  // distance, then lowest index
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(nn), ranked.size());
  std::vector<int> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = ranked[i].second;
  return out;
}

Dataset impute_once(const Dataset& data, const ImputationConfig& config, Rng& rng) {
  validate(config);
  const std::vector<int> missing = missing_rows(data);
  if (missing.empty()) return data;
  if (complete_rows(data).empty()) {
    throw EmptyCompleteSetError("nnmi: no complete rows to impute from");
  }

  const std::size_t n = data.size();
  const Eigen::VectorXd cumhaz = nelson_aalen_at_times(data);

  std::exception_ptr last_error;
  for (int attempt = 0; attempt <= config.max_redraws; ++attempt) {
    Dataset sample(n);
    Eigen::VectorXd sample_cumhaz(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = rng.uniform_index(n);
      sample[i] = data[idx];
      sample_cumhaz[static_cast<Eigen::Index>(i)] = cumhaz[static_cast<Eigen::Index>(idx)];
    }

    ScoreModels models;
    try {
      models = fit_score_models(sample, config.spec_x, config.spec_miss, sample_cumhaz);
    } catch (const Error&) {
      last_error = std::current_exception();
      continue;
    }

    const std::vector<int> donor_rows = complete_rows(sample);
    std::vector<std::pair<int, ScorePair>> donors;
    donors.reserve(donor_rows.size());
    for (int k : donor_rows) {
      donors.emplace_back(
          k, score_original(sample[static_cast<std::size_t>(k)], models,
                            sample_cumhaz[k]));
    }

    Dataset completed = data;
    for (int j : missing) {
      const ScorePair target =
          score_original(data[static_cast<std::size_t>(j)], models, cumhaz[j]);
      const std::vector<int> set =
          select_imputing_set(target, donors, config.nn, config.w1, config.w2);
      const int pick = set[rng.uniform_index(set.size())];
      completed[static_cast<std::size_t>(j)].x = *sample[static_cast<std::size_t>(pick)].x;
    }
    return completed;
  }
  if (last_error) std::rethrow_exception(last_error);
  throw ImputationError("nnmi: bootstrap redraw budget exhausted");
}

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::VectorXd>& variances) {
  const std::size_t m = estimates.size();
  if (m < 2) throw ConfigError("rubin_pool: need at least two imputations");
  if (variances.size() != m) {
    throw DimensionMismatchError("rubin_pool: estimates/variances count mismatch");
  }
  const Eigen::Index p = estimates.front().size();
  for (std::size_t i = 0; i < m; ++i) {
    if (estimates[i].size() != p || variances[i].size() != p) {
      throw DimensionMismatchError("rubin_pool: inconsistent coefficient dimensions");
    }
    if ((variances[i].array() < 0.0).any()) {
      throw Error("rubin_pool: negative within-imputation variance");
    }
  }

  const double md = static_cast<double>(m);
  PooledEstimate out;
  out.m_used = static_cast<int>(m);
  out.beta.resize(p);
  out.variance.resize(p);
  out.df.resize(p);
  out.ci_lower.resize(p);
  out.ci_upper.resize(p);
  out.p_value.resize(p);
  out.degenerate_b.assign(static_cast<std::size_t>(p), false);

  const boost::math::normal_distribution<double> normal;
  for (Eigen::Index k = 0; k < p; ++k) {
    bool all_equal = true;
    for (std::size_t i = 1; i < m && all_equal; ++i) {
      all_equal = estimates[i][k] == estimates[0][k];
    }

    double u = 0.0;
    for (std::size_t i = 0; i < m; ++i) u += variances[i][k];
    u /= md;

    double beta, b;
    if (all_equal) {
      beta = estimates[0][k];
      b = 0.0;
    } else {
      beta = 0.0;
      for (std::size_t i = 0; i < m; ++i) beta += estimates[i][k];
      beta /= md;
      b = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = estimates[i][k] - beta;
        b += d * d;
      }
      b /= (md - 1.0);
    }

    const double total = u + (1.0 + 1.0 / md) * b;
    out.beta[k] = beta;
    out.variance[k] = total;

    double q;  // 97.5% quantile of the reference distribution
    if (b == 0.0) {
      out.degenerate_b[static_cast<std::size_t>(k)] = true;
      out.df[k] = std::numeric_limits<double>::infinity();
      q = boost::math::quantile(normal, 0.975);
      const double t_stat = total > 0.0 ? std::abs(beta) / std::sqrt(total)
                                        : (beta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      out.p_value[k] = 2.0 * boost::math::cdf(boost::math::complement(normal, t_stat));
    } else {
      const double ratio = u * md / (md + 1.0) / b;
      const double v = (md - 1.0) * (1.0 + ratio) * (1.0 + ratio);
      out.df[k] = v;
      const boost::math::students_t_distribution<double> tdist(v);
      q = boost::math::quantile(tdist, 0.975);
      const double t_stat = std::abs(beta) / std::sqrt(total);
      out.p_value[k] = 2.0 * boost::math::cdf(boost::math::complement(tdist, t_stat));
    }
    const double half = q * std::sqrt(total);
    out.ci_lower[k] = beta - half;
    out.ci_upper[k] = beta + half;
  }
  return out;
}

PooledEstimate nnmi_estimate(const Dataset& data, const ImputationConfig& config) {
  validate(config);
  const std::size_t m = static_cast<std::size_t>(config.m);
  std::vector<Eigen::VectorXd> estimates(m), variances(m);

  parallel_for(m, config.workers, [&](std::size_t i) {
    try {
      Rng rng(derive_seed(config.seed, "nnmi_impute", i));
      const Dataset completed = impute_once(data, config, rng);
      const CoxFit fit = fit_cox(design_full(completed));
      estimates[i] = fit.beta;
      variances[i] = fit.covariance.diagonal();
    } catch (const Error& e) {
      throw ImputationError("nnmi: imputation " + std::to_string(i + 1) + " failed: " + e.what());
    }
  });
  return rubin_pool(estimates, variances);
}

}  // namespace coxmi
