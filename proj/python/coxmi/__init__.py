"""Cox regression with a missing covariate.

Estimators: complete-case, augmented inverse-probability weighting (AIPW)
with bootstrap standard errors, and nonparametric nearest-neighbor multiple
imputation (NNMI) pooled by Rubin's rules. Plus the generative models and
Monte Carlo harness used to study them.
"""

from ._core import (
    CoxmiError,
    builtin_scenarios,
    fit_aipw,
    fit_complete_case,
    fit_cox,
    fit_nnmi,
    generate_dataset,
    impute,
    nelson_aalen,
    run_monte_carlo,
    __version__,
)

__all__ = [
    "CoxmiError",
    "builtin_scenarios",
    "fit_aipw",
    "fit_complete_case",
    "fit_cox",
    "fit_nnmi",
    "generate_dataset",
    "impute",
    "nelson_aalen",
    "run_monte_carlo",
    "__version__",
]
