#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coxmi/cox.hpp"
#include "coxmi/dataset.hpp"
#include "coxmi/glm.hpp"
#include "coxmi/rng.hpp"

namespace coxmi {

struct ImputationConfig {
  int nn = 5;       // donor-set size
  double w1 = 0.8;  // weight on the x-predictive score distance
  double w2 = 0.2;  // weight on the missingness-predictive score distance
  int m = 10;       // number of imputations
  std::uint64_t seed = 0;
  FeatureSpec spec_x = {Feature::Z, Feature::Event, Feature::CumHazard};
  FeatureSpec spec_miss = {Feature::Z, Feature::Time};
  int max_redraws = 10;  // bootstrap redraws after a failed working-model fit
  unsigned workers = 1;
};

// Throws ConfigError unless w1, w2 >= 0, w1 + w2 = 1, nn >= 1, m >= 2.
void validate(const ImputationConfig& config);

struct ScorePair {
  double s_x = 0.0;
  double s_miss = 0.0;
};

// Bootstrap-sample moments used to standardize raw scores.
struct Standardizers {
  double mean_x = 0.0;
  double sd_x = 0.0;
  double mean_miss = 0.0;
  double sd_miss = 0.0;
};

struct ScoreModels {
  GlmFit x_model;     // predicts x; logit for binary x, identity otherwise
  GlmFit miss_model;  // predicts delta_x, logit
  Standardizers standardizers;
  FeatureSpec spec_x;
  FeatureSpec spec_miss;
};

struct PooledEstimate {
  Eigen::VectorXd beta;
  Eigen::VectorXd variance;  // total variance T = U + (1 + 1/M) B
  Eigen::VectorXd df;        // infinite on the degenerate B = 0 path
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  Eigen::VectorXd p_value;   // two-sided, t reference
  std::vector<bool> degenerate_b;
  int m_used = 0;
};

// Fits both working models on a bootstrap sample (x-model on its complete
// rows, miss-model on all rows) and records the standardizers, i.e. the
// bootstrap-sample mean and SD of each raw score. cumhaz holds the
// original-sample cumulative hazard evaluated at each bootstrap row's time.
// Throws (DegenerateOutcomeError, DegenerateScoreError, ...) when the sample
// cannot support the fits; callers redraw.
ScoreModels fit_score_models(const Dataset& bootstrap_sample,
                             const FeatureSpec& spec_x, const FeatureSpec& spec_miss,
                             const Eigen::VectorXd& cumhaz);

// Standardized predictive scores for one record (cumhaz = H0 at its time).
ScorePair score_original(const SurvivalRecord& record, const ScoreModels& models,
                         double cumhaz);

double nn_distance(const ScorePair& a, const ScorePair& b, double w1, double w2);

// Indices of the nn donors closest to target; distance ties break toward the
// lowest donor index. Returns all donors when fewer than nn exist.
std::vector<int> select_imputing_set(const ScorePair& target,
                                     const std::vector<std::pair<int, ScorePair>>& donors,
                                     int nn, double w1, double w2);

// One completed dataset: bootstrap sample -> working models -> donor sets ->
// uniform draws. Observed x values are never altered; a dataset with no
// missing x is returned unchanged without consuming rng.
Dataset impute_once(const Dataset& data, const ImputationConfig& config, Rng& rng);

// Rubin's rules over M coefficient vectors and within-imputation variances.
PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::VectorXd>& variances);

// M imputations on independent RNG substreams, a Cox fit per completed
// dataset, pooled by rubin_pool. Throws ImputationError naming the replicate
// on an unrecoverable fit failure.
PooledEstimate nnmi_estimate(const Dataset& data, const ImputationConfig& config);

}  // namespace coxmi
