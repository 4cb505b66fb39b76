"""Smoke tests for the Python bindings.

The Cox oracle values (root, log-likelihood, variance, cumulative-hazard
jumps) are the same independently derived constants the C++ suite freezes:
a six-subject fixture small enough to check against a grid search and exact
tie-group formulas.
"""

import math

import numpy as np
import pytest

import coxmi

TIME = np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0])
EVENT = np.array([1, 1, 1, 0, 1, 0], dtype=np.int32)
X6 = np.array([0.5, -1.0, 0.0, 1.5, 2.0, -0.5])


def table4_arrays(n=150, seed=2001):
    gen = coxmi.generate_dataset("table4", n=n, seed=seed)
    return gen


def design(x, z):
    return np.column_stack([x, z])


def test_version_and_exports():
    assert isinstance(coxmi.__version__, str)
    assert coxmi.__version__
    for name in coxmi.__all__:
        assert hasattr(coxmi, name)


def test_fit_cox_matches_frozen_oracle():
    fit = coxmi.fit_cox(TIME, EVENT, X6.reshape(-1, 1))
    assert fit["beta"][0] == pytest.approx(-0.08804563698592451, rel=1e-8)
    assert fit["loglik"] == pytest.approx(-5.683326285580614, rel=1e-10)
    assert fit["covariance"][0, 0] == pytest.approx(0.19139403106931052, rel=1e-8)
    assert fit["se"][0] == pytest.approx(math.sqrt(fit["covariance"][0, 0]), rel=1e-12)
    assert fit["n_iter"] >= 1


def test_nelson_aalen_jumps():
    knots, values = coxmi.nelson_aalen(TIME, EVENT)
    # Risk sets of size 6, 5, 2 at the event times 1, 2, 4.
    np.testing.assert_allclose(knots, [1.0, 2.0, 4.0])
    np.testing.assert_allclose(values, [1 / 6, 1 / 6 + 2 / 5, 1 / 6 + 2 / 5 + 1 / 2],
                               rtol=1e-15)


def test_generate_dataset_shapes_and_rates():
    n = 4000
    gen = coxmi.generate_dataset("table4", n=n, seed=99)
    for key in ("time", "event", "x_full", "x_observed", "z"):
        assert len(gen[key]) == n
    assert np.all(gen["time"] > 0)
    assert set(np.unique(gen["event"])) <= {0, 1}
    assert set(np.unique(gen["x_full"])) == {0.0, 1.0}
    assert np.all((gen["z"] >= 0) & (gen["z"] < 1))
    missing = np.isnan(gen["x_observed"])
    assert gen["missing_rate"] == pytest.approx(missing.mean())
    assert gen["censoring_rate"] == pytest.approx(1 - gen["event"].mean())
    # Observed entries agree with the latent covariate.
    np.testing.assert_array_equal(gen["x_observed"][~missing], gen["x_full"][~missing])
    assert 0.55 < gen["missing_rate"] < 0.7
    assert 0.3 < gen["censoring_rate"] < 0.4


def test_complete_case_drops_only_missing_rows():
    gen = table4_arrays()
    cc = coxmi.fit_complete_case(gen["time"], gen["event"], gen["x_observed"],
                                 gen["z"].reshape(-1, 1))
    keep = ~np.isnan(gen["x_observed"])
    direct = coxmi.fit_cox(gen["time"][keep], gen["event"][keep],
                           design(gen["x_observed"][keep], gen["z"][keep]))
    np.testing.assert_allclose(cc["beta"], direct["beta"], rtol=1e-12)
    np.testing.assert_allclose(cc["covariance"], direct["covariance"], rtol=1e-12)


def test_nnmi_reduces_to_full_fit_without_missingness():
    gen = table4_arrays()
    full = coxmi.fit_cox(gen["time"], gen["event"], design(gen["x_full"], gen["z"]))
    pooled = coxmi.fit_nnmi(gen["time"], gen["event"], gen["x_full"],
                            gen["z"].reshape(-1, 1), m=5, seed=31)
    np.testing.assert_allclose(pooled["beta"], full["beta"], rtol=1e-13)
    np.testing.assert_allclose(pooled["variance"],
                               np.diag(full["covariance"]), rtol=1e-13)
    assert pooled["m_used"] == 5
    assert np.all(np.isinf(pooled["df"]))  # no between-imputation variance
    assert np.all(pooled["ci_lower"] <= pooled["beta"])
    assert np.all(pooled["ci_upper"] >= pooled["beta"])


def test_nnmi_and_aipw_are_deterministic_under_a_seed():
    gen = table4_arrays(seed=2002)
    args = (gen["time"], gen["event"], gen["x_observed"], gen["z"].reshape(-1, 1))

    a = coxmi.fit_nnmi(*args, m=5, seed=7)
    b = coxmi.fit_nnmi(*args, m=5, seed=7)
    np.testing.assert_array_equal(a["beta"], b["beta"])
    np.testing.assert_array_equal(a["variance"], b["variance"])
    c = coxmi.fit_nnmi(*args, m=5, seed=8)
    assert not np.array_equal(a["beta"], c["beta"])

    d = coxmi.fit_aipw(*args, n_boot=40, seed=7)
    e = coxmi.fit_aipw(*args, n_boot=40, seed=7)
    assert not d["diverged"]
    np.testing.assert_array_equal(d["beta"], e["beta"])
    np.testing.assert_array_equal(d["se"], e["se"])
    f = coxmi.fit_aipw(*args, n_boot=40, seed=8)
    np.testing.assert_array_equal(d["beta"], f["beta"])  # point estimate is seed-free
    assert not np.array_equal(d["se"], f["se"])  # bootstrap SE is not


def test_impute_fills_only_the_holes():
    gen = table4_arrays(seed=2003)
    missing = np.isnan(gen["x_observed"])
    assert missing.any()
    copies = coxmi.impute(gen["time"], gen["event"], gen["x_observed"],
                          gen["z"].reshape(-1, 1), m=3, seed=11)
    assert len(copies) == 3
    for xs in copies:
        assert not np.isnan(xs).any()
        np.testing.assert_array_equal(xs[~missing], gen["x_observed"][~missing])
        assert set(np.unique(xs[missing])) <= {0.0, 1.0}
    again = coxmi.impute(gen["time"], gen["event"], gen["x_observed"],
                         gen["z"].reshape(-1, 1), m=3, seed=11)
    for xs, ys in zip(copies, again):
        np.testing.assert_array_equal(xs, ys)


def test_run_monte_carlo_summary_layout():
    summary = coxmi.run_monte_carlo("table4", 100, ["FO", "CC"], reps=2, seed=5,
                                    workers=1)
    assert summary["replicates"] == 2
    assert [row["method"] for row in summary["methods"]] == ["FO", "CC"]
    for row in summary["methods"]:
        assert row["n_used"] == 2
        assert isinstance(row["beta_x"]["est"], float)
        assert isinstance(row["beta_z"]["est"], float)
    repeat = coxmi.run_monte_carlo("table4", 100, ["FO", "CC"], reps=2, seed=5,
                                   workers=1)
    assert summary == repeat


def test_builtin_scenarios_catalogue():
    scenarios = coxmi.builtin_scenarios()
    assert len(scenarios) == 8
    labels = {s["label"] for s in scenarios}
    assert labels == {"table4", "table4_cloglog", "table5", "table5_cloglog"}
    for s in scenarios:
        assert s["beta_x"] == pytest.approx(math.log(2))
        assert s["beta_z"] == pytest.approx(-math.log(2))


def test_errors_surface_as_coxmi_error():
    with pytest.raises(coxmi.CoxmiError):
        coxmi.fit_cox(TIME, EVENT[:3], X6.reshape(-1, 1))
    with pytest.raises(coxmi.CoxmiError):
        coxmi.run_monte_carlo("table4", 100, ["NOPE"], reps=2)
    with pytest.raises(coxmi.CoxmiError):
        coxmi.fit_nnmi(TIME, EVENT, X6, np.zeros((6, 1)), m=1)  # m must be >= 2
