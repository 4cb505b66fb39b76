#pragma once

#include "coxmi/cox.hpp"
#include "coxmi/dataset.hpp"

namespace coxmi {

// Cox fit on the rows with x observed, covariates (x, z...).
CoxFit fit_complete_case(const Dataset& data, const CoxOptions& options = {});

}  // namespace coxmi
