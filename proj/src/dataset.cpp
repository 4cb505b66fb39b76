#include "coxmi/dataset.hpp"

#include <cmath>

#include "coxmi/cox.hpp"
#include "coxmi/errors.hpp"

namespace coxmi {

void validate(const CoxData& data) {
  const Eigen::Index n = data.time.size();
  if (data.event.size() != n || data.covariates.rows() != n) {
    throw DimensionMismatchError("cox data: inconsistent row counts");
  }
  if (data.weights.size() != 0 && data.weights.size() != n) {
    throw DimensionMismatchError("cox data: weights length does not match data");
  }
  bool any_event = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.time[i] < 0.0 || !std::isfinite(data.time[i])) {
      throw Error("cox data: times must be finite and nonnegative");
    }
    if (data.event[i] != 0 && data.event[i] != 1) {
      throw Error("cox data: event indicator must be 0 or 1");
    }
    if (data.weights.size() != 0 && !(data.weights[i] >= 0.0)) {
      throw Error("cox data: weights must be nonnegative");
    }
    any_event |= data.event[i] == 1;
  }
  if (!any_event) throw NoEventsError("cox data: no events");
}

std::size_t z_dimension(const Dataset& data) {
  if (data.empty()) return 0;
  const std::size_t dim = data.front().z.size();
  for (const auto& rec : data) {
    if (rec.z.size() != dim) {
      throw DimensionMismatchError("dataset: rows disagree on z dimension");
    }
  }
  return dim;
}

namespace {

CoxData design_rows(const Dataset& data, const std::vector<int>& rows) {
  const std::size_t zdim = z_dimension(data);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  CoxData out;
  out.time.resize(n);
  out.event.resize(n);
  out.covariates.resize(n, static_cast<Eigen::Index>(1 + zdim));
  for (Eigen::Index i = 0; i < n; ++i) {
    const SurvivalRecord& rec = data[static_cast<std::size_t>(rows[i])];
    if (!rec.x_observed()) {
      throw Error("dataset: covariate x is missing where a complete design is required");
    }
    out.time[i] = rec.time;
    out.event[i] = rec.event;
    out.covariates(i, 0) = *rec.x;
    for (std::size_t k = 0; k < zdim; ++k) {
      out.covariates(i, static_cast<Eigen::Index>(1 + k)) = rec.z[k];
    }
  }
  return out;
}

}  // namespace

CoxData design_full(const Dataset& data) {
  std::vector<int> rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) rows[i] = static_cast<int>(i);
  return design_rows(data, rows);
}

CoxData design_complete_cases(const Dataset& data) {
  std::vector<int> rows = complete_rows(data);
  if (rows.empty()) throw EmptyCompleteSetError("dataset: no rows with x observed");
  return design_rows(data, rows);
}

std::vector<int> complete_rows(const Dataset& data) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].x_observed()) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

std::vector<int> missing_rows(const Dataset& data) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].x_observed()) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

bool x_is_binary(const Dataset& data) {
  for (const auto& rec : data) {
    if (rec.x_observed() && *rec.x != 0.0 && *rec.x != 1.0) return false;
  }
  return true;
}

std::size_t feature_dimension(const Dataset& data, const FeatureSpec& spec) {
  const std::size_t zdim = z_dimension(data);
  std::size_t dim = 0;
  for (Feature f : spec) dim += (f == Feature::Z) ? zdim : 1;
  return dim;
}

Eigen::VectorXd feature_row(const SurvivalRecord& record, double cumhaz,
                            const FeatureSpec& spec) {
  std::size_t dim = 0;
  for (Feature f : spec) dim += (f == Feature::Z) ? record.z.size() : 1;
  Eigen::VectorXd row(static_cast<Eigen::Index>(dim));
  Eigen::Index c = 0;
  for (Feature f : spec) {
    switch (f) {
      case Feature::Z:
        for (double v : record.z) row[c++] = v;
        break;
      case Feature::Time:
        row[c++] = record.time;
        break;
      case Feature::Event:
        row[c++] = static_cast<double>(record.event);
        break;
      case Feature::CumHazard:
        row[c++] = cumhaz;
        break;
    }
  }
  return row;
}

Eigen::MatrixXd working_design(const Dataset& data, std::span<const int> rows,
                               const FeatureSpec& spec,
                               const Eigen::VectorXd& cumhaz) {
  if (cumhaz.size() != static_cast<Eigen::Index>(data.size())) {
    throw DimensionMismatchError("working design: cumhaz length does not match data");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(feature_dimension(data, spec));
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    design.row(static_cast<Eigen::Index>(i)) =
        feature_row(data[static_cast<std::size_t>(r)], cumhaz[r], spec).transpose();
  }
  return design;
}

Eigen::VectorXd nelson_aalen_at_times(const Dataset& data) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd time(n);
  Eigen::VectorXi event(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    time[i] = data[static_cast<std::size_t>(i)].time;
    event[i] = data[static_cast<std::size_t>(i)].event;
  }
  const StepFunction h0 = nelson_aalen(time, event);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = h0(time[i]);
  return out;
}

}  // namespace coxmi
