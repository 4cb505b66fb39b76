#pragma once

#include <vector>

namespace coxmi {

// Right-continuous step function: value on [knot_i, knot_{i+1}) is values[i],
// and 0 anywhere before the first knot. Carrier for cumulative hazard
// estimates.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values);

  double operator()(double t) const;

  bool empty() const { return knots_.empty(); }
  std::size_t size() const { return knots_.size(); }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

}  // namespace coxmi
