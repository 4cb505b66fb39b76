#include "coxmi/step_function.hpp"

#include <algorithm>
#include <utility>

#include "coxmi/errors.hpp"

namespace coxmi {

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size()) {
    throw DimensionMismatchError("step function: knots and values differ in length");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1])) {
      throw Error("step function: knots must be strictly increasing");
    }
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

}  // namespace coxmi
