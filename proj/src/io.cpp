#include "coxmi/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "coxmi/errors.hpp"

namespace coxmi {

namespace {

// Minimal RFC-4180 reader: quoted fields may contain commas, newlines and
// doubled quotes.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  const std::size_t n = content.size();
  auto end_field = [&] { row.push_back(std::move(field)); field.clear(); };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field += c;
    }
    ++i;
  }
  if (quoted) throw ParseError("csv: unterminated quoted field in '" + path + "'");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("csv row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + text + "' as a number");
  }
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string sig6(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LoadedData load_csv(const std::string& path, const DatasetSchema& schema) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw ParseError("csv: '" + path + "' has no header row");
  const std::vector<std::string>& header = rows.front();

  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError("csv: column '" + name + "' not found in header of '" + path + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t time_col = column_index(schema.time_column);
  const std::size_t status_col = column_index(schema.status_column);
  const std::size_t x_col = column_index(schema.missing_covariate_column);
  std::vector<std::size_t> z_cols;
  for (const std::string& name : schema.covariate_columns) z_cols.push_back(column_index(name));

  auto is_missing = [&](const std::string& raw) {
    const std::string t = trimmed(raw);
    return t.empty() || (!schema.missing_sentinel.empty() && t == schema.missing_sentinel);
  };

  // First pass: level discovery for categorical columns, in file order.
  std::map<std::string, std::vector<std::string>> levels;
  for (const auto& [col, ref] : schema.categorical_encodings) {
    (void)ref;
    if (std::find(schema.covariate_columns.begin(), schema.covariate_columns.end(), col) ==
        schema.covariate_columns.end()) {
      throw ConfigError("schema: categorical column '" + col + "' is not a covariate column");
    }
    levels[col] = {};
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw ParseError("csv row " + std::to_string(r) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(rows[r].size()));
    }
    for (auto& [col, seen] : levels) {
      const std::string value = trimmed(rows[r][column_index(col)]);
      if (std::find(seen.begin(), seen.end(), value) == seen.end()) seen.push_back(value);
    }
  }
  for (const auto& [col, ref] : schema.categorical_encodings) {
    const auto& seen = levels[col];
    if (std::find(seen.begin(), seen.end(), ref) == seen.end()) {
      throw UnknownLevelError("csv: reference level '" + ref + "' never appears in column '" +
                              col + "'");
    }
  }

  LoadedData out;
  out.x_name = schema.missing_covariate_column;
  for (const std::string& name : schema.covariate_columns) {
    const auto enc = schema.categorical_encodings.find(name);
    if (enc == schema.categorical_encodings.end()) {
      out.covariate_names.push_back(name);
    } else {
      for (const std::string& level : levels[name]) {
        if (level != enc->second) out.covariate_names.push_back(name + "_" + level);
      }
    }
  }

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    SurvivalRecord rec;
    rec.time = parse_double(trimmed(fields[time_col]), r, schema.time_column);
    if (rec.time < 0.0) {
      throw NegativeTimeError("csv row " + std::to_string(r) + ": negative time " +
                              fields[time_col]);
    }
    const double status = parse_double(trimmed(fields[status_col]), r, schema.status_column);
    if (status != 0.0 && status != 1.0) {
      throw ParseError("csv row " + std::to_string(r) + ": status must be 0 or 1, found '" +
                       fields[status_col] + "'");
    }
    rec.event = static_cast<int>(status);
    if (!is_missing(fields[x_col])) {
      rec.x = parse_double(trimmed(fields[x_col]), r, schema.missing_covariate_column);
    }
    for (std::size_t i = 0; i < schema.covariate_columns.size(); ++i) {
      const std::string& name = schema.covariate_columns[i];
      const std::string raw = trimmed(fields[z_cols[i]]);
      const auto enc = schema.categorical_encodings.find(name);
      if (enc == schema.categorical_encodings.end()) {
        if (is_missing(raw)) {
          throw ParseError("csv row " + std::to_string(r) + ": covariate '" + name +
                           "' is empty; only '" + schema.missing_covariate_column +
                           "' may be missing");
        }
        rec.z.push_back(parse_double(raw, r, name));
      } else {
        for (const std::string& level : levels[name]) {
          if (level != enc->second) rec.z.push_back(raw == level ? 1.0 : 0.0);
        }
      }
    }
    out.data.push_back(std::move(rec));
  }
  if (out.data.empty()) throw ParseError("csv: '" + path + "' has no data rows");
  return out;
}

AnalysisResult make_normal_result(const std::string& method,
                                  const std::vector<std::string>& names,
                                  const Eigen::VectorXd& beta, const Eigen::VectorXd& se) {
  if (beta.size() != se.size() || static_cast<std::size_t>(beta.size()) != names.size()) {
    throw DimensionMismatchError("results: names/beta/se lengths disagree");
  }
  const boost::math::normal_distribution<double> normal;
  const double q = boost::math::quantile(normal, 0.975);
  AnalysisResult out;
  out.method = method;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    CoefficientResult c;
    c.name = names[static_cast<std::size_t>(k)];
    c.beta = beta[k];
    c.se = se[k];
    c.hr = std::exp(beta[k]);
    c.ci_lower = std::exp(beta[k] - q * se[k]);
    c.ci_upper = std::exp(beta[k] + q * se[k]);
    const double z = se[k] > 0.0 ? std::abs(beta[k]) / se[k]
                                 : (beta[k] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(normal, z));
    c.df = std::numeric_limits<double>::infinity();
    out.coefficients.push_back(std::move(c));
  }
  return out;
}

std::string results_csv(const std::vector<AnalysisResult>& results) {
  std::ostringstream os;
  os << "method,covariate,hr,ci_lower,ci_upper,p_value\n";
  for (const AnalysisResult& res : results) {
    for (const CoefficientResult& c : res.coefficients) {
      os << res.method << ',' << c.name << ',' << sig6(c.hr) << ',' << sig6(c.ci_lower)
         << ',' << sig6(c.ci_upper) << ',' << sig6(c.p_value) << '\n';
    }
  }
  return os.str();
}

nlohmann::json results_json(const std::vector<AnalysisResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const AnalysisResult& res : results) {
    nlohmann::json r;
    r["method"] = res.method;
    r["coefficients"] = nlohmann::json::array();
    for (const CoefficientResult& c : res.coefficients) {
      nlohmann::json cj;
      cj["name"] = c.name;
      cj["beta"] = c.beta;
      cj["se"] = c.se;
      cj["hr"] = c.hr;
      cj["ci_lower"] = c.ci_lower;
      cj["ci_upper"] = c.ci_upper;
      cj["p_value"] = c.p_value;
      if (std::isinf(c.df)) {
        cj["df"] = nullptr;  // normal reference
      } else {
        cj["df"] = c.df;
      }
      r["coefficients"].push_back(cj);
    }
    if (!res.metadata.is_null()) r["metadata"] = res.metadata;
    j.push_back(r);
  }
  return j;
}

void write_results(const std::vector<AnalysisResult>& results, const std::string& format,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (format == "csv") {
    out << results_csv(results);
  } else if (format == "json") {
    out << results_json(results).dump(2) << '\n';
  } else {
    throw ConfigError("results: unknown format '" + format + "'");
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::string& x_name,
                       const std::vector<std::string>& z_names) {
  if (!data.empty() && z_names.size() != data.front().z.size()) {
    throw DimensionMismatchError("dataset csv: z name count does not match data");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "time,status," << x_name;
  for (const std::string& name : z_names) out << ',' << name;
  out << '\n';
  for (const SurvivalRecord& rec : data) {
    out << full_precision(rec.time) << ',' << rec.event << ',';
    if (rec.x_observed()) out << full_precision(*rec.x);
    for (double z : rec.z) out << ',' << full_precision(z);
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace coxmi
