#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coxmi/dataset.hpp"

namespace coxmi {

struct DatasetSchema {
  std::string time_column;
  std::string status_column;
  std::string missing_covariate_column;           // empty cell => delta_x = 0
  std::vector<std::string> covariate_columns;     // fully observed covariates
  std::map<std::string, std::string> categorical_encodings;  // column -> reference level
  std::string missing_sentinel;  // optional token also treated as missing
};

struct LoadedData {
  Dataset data;
  std::string x_name;                       // the missing covariate's column
  std::vector<std::string> covariate_names;  // z columns after expansion
};

// CSV with a header row; categorical covariates expand to indicator columns
// named "<column>_<level>" against the declared reference level, levels in
// order of first appearance. Throws ParseError (with row/column context),
// NegativeTimeError, UnknownLevelError.
LoadedData load_csv(const std::string& path, const DatasetSchema& schema);

// One coefficient of a fitted model, on both scales. df is infinite when the
// reference distribution is normal.
struct CoefficientResult {
  std::string name;
  double beta = 0.0;
  double se = 0.0;
  double hr = 1.0;
  double ci_lower = 0.0;  // HR scale
  double ci_upper = 0.0;
  double p_value = 1.0;
  double df = 0.0;
};

struct AnalysisResult {
  std::string method;
  std::vector<CoefficientResult> coefficients;
  nlohmann::json metadata;  // seed, config, diagnostics
};

// Normal-reference result (CC, AIPW, FO): CI = exp(beta -+ 1.96 se),
// two-sided p from the standard normal.
AnalysisResult make_normal_result(const std::string& method,
                                  const std::vector<std::string>& names,
                                  const Eigen::VectorXd& beta, const Eigen::VectorXd& se);

// Results-table files: per covariate the hazard ratio, 95% CI and p-value.
// CSV carries 6 significant digits; JSON carries full precision plus the
// per-result metadata.
void write_results(const std::vector<AnalysisResult>& results, const std::string& format,
                   const std::string& path);
nlohmann::json results_json(const std::vector<AnalysisResult>& results);
std::string results_csv(const std::vector<AnalysisResult>& results);

// Completed-dataset export (impute command); missing x becomes an empty cell.
// Full %.17g precision so fixed seeds reproduce files byte-identically.
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::string& x_name,
                       const std::vector<std::string>& z_names);

}  // namespace coxmi
