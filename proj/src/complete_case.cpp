#include "coxmi/complete_case.hpp"

namespace coxmi {

CoxFit fit_complete_case(const Dataset& data, const CoxOptions& options) {
  return fit_cox(design_complete_cases(data), options);
}

}  // namespace coxmi
