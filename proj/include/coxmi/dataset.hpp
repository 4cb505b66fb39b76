#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

namespace coxmi {

// One subject: observed time, event indicator, fully observed covariates z,
// and one covariate x that may be missing (absent optional <=> delta_x = 0).
struct SurvivalRecord {
  double time = 0.0;
  int event = 0;  // 1 = failure observed, 0 = censored
  std::optional<double> x;
  std::vector<double> z;

  bool x_observed() const { return x.has_value(); }
};

using Dataset = std::vector<SurvivalRecord>;

// Design-level view consumed by the Cox numerics.
struct CoxData {
  Eigen::VectorXd time;
  Eigen::VectorXi event;       // 0/1
  Eigen::MatrixXd covariates;  // n x p
  Eigen::VectorXd weights;     // size 0 => unit weights

  Eigen::Index n() const { return time.size(); }
  Eigen::Index p() const { return covariates.cols(); }
};

// Throws DimensionMismatchError / NoEventsError / Error on invalid input.
void validate(const CoxData& data);

// Number of z covariates; throws DimensionMismatchError if rows disagree.
std::size_t z_dimension(const Dataset& data);

// Design with columns (x, z...); every record must have x observed.
CoxData design_full(const Dataset& data);

// Design (x, z...) restricted to rows with x observed.
// Throws EmptyCompleteSetError when no such row exists.
CoxData design_complete_cases(const Dataset& data);

// Row indices with x observed / missing.
std::vector<int> complete_rows(const Dataset& data);
std::vector<int> missing_rows(const Dataset& data);

// True when every observed x lies in {0, 1}.
bool x_is_binary(const Dataset& data);

// Covariates available to the working models. Z expands to all z columns;
// the others contribute one column each. CumHazard is the marginal
// Nelson-Aalen estimate evaluated at the subject's observed time.
enum class Feature { Z, Time, Event, CumHazard };
using FeatureSpec = std::vector<Feature>;

std::size_t feature_dimension(const Dataset& data, const FeatureSpec& spec);

// Feature row for one record; cumhaz is H0 evaluated at record.time.
Eigen::VectorXd feature_row(const SurvivalRecord& record, double cumhaz,
                            const FeatureSpec& spec);

// Stacked feature rows for the given dataset rows (duplicates allowed, e.g.
// bootstrap index vectors). cumhaz holds H0(time_i) per original row.
Eigen::MatrixXd working_design(const Dataset& data, std::span<const int> rows,
                               const FeatureSpec& spec,
                               const Eigen::VectorXd& cumhaz);

// Marginal Nelson-Aalen cumulative hazard evaluated at each record's time.
Eigen::VectorXd nelson_aalen_at_times(const Dataset& data);

}  // namespace coxmi
