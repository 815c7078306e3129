import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weak_euler.models import make_model, make_payoff
from weak_euler.weak_error import (BiasCheck, ReferenceBiasError, _apply_bias_policy, analytic_report,
                                   convergence_study, estimate_weak_error, expansion_from_errors, fit_rate,
                                   gbm_second_moment_error, richardson, richardson_study, write_ladder_csv,
                                   write_plotdata)

# frozen from an independent float evaluation of e - (1 + h)^(1/h)
GBM_ERROR_N10 = 0.12453936835904278
ANALYTIC_SLOPE_4_TO_64 = 0.9335099581299642
C_HAT_256 = 1.354292276636329


def test_gbm_second_moment_error_values():
    assert gbm_second_moment_error(0.1) == pytest.approx(GBM_ERROR_N10, rel=1e-14)
    assert gbm_second_moment_error(1 / 256) * 256 == pytest.approx(C_HAT_256, rel=1e-12)
    assert gbm_second_moment_error(0.5, T=1.0, sigma0=2.0, x0=3.0) == pytest.approx(9 * (math.e ** 4 - 9))


def test_analytic_ladder_slope():
    rep = analytic_report([4, 8, 16, 32, 64], 1.0, gbm_second_moment_error)
    assert rep.slope == pytest.approx(ANALYTIC_SLOPE_4_TO_64, abs=1e-12)
    assert rep.slope_ci[0] < rep.slope < rep.slope_ci[1]
    assert rep.excluded_points == []


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.01, 100.0))
def test_fit_rate_recovers_power_law(p, c):
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    slope, ci, icpt, excl = fit_rate(h, c * h ** p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert icpt == pytest.approx(math.log(c), abs=1e-8)
    slope_w, _, _, _ = fit_rate(h, -c * h ** p, 0.01 * c * h ** p)
    assert slope_w == pytest.approx(p, abs=1e-9)


def test_fit_rate_excludes_noise():
    h = [0.5, 0.25, 0.125, 0.0625, 0.03125]
    e = [0.5, 0.25, 0.125, 0.001, 0.03]
    se = [0.01, 0.01, 0.01, 0.01, 0.001]
    slope, _, _, excl = fit_rate(h, e, se)
    assert excl == [3]
    slope, ci, _, _ = fit_rate(h[:3], e[:3], [1, 1, 1])
    assert math.isnan(slope) and math.isnan(ci[0])


def test_expansion_limit_from_exact_errors():
    n = np.array([4, 8, 16, 32, 64, 128, 256])
    est = expansion_from_errors(1.0 / n, gbm_second_moment_error(1.0 / n))
    assert est.c_hat[-1][1] == pytest.approx(C_HAT_256, rel=1e-12)
    assert abs(est.limit_estimate - math.e / 2) < 1e-4
    assert est.decreasing


def test_exact_reference_reproduces_gbm_error():
    est = estimate_weak_error(make_model("gbm"), make_payoff("square"), 10, 1, 100_000, seed=0)
    assert abs(est.estimate - GBM_ERROR_N10) < 4 * est.stderr
    assert est.bias_check is None


def test_constant_volatility_has_no_error():
    m, f = make_model("constant"), make_payoff("sin")
    est = estimate_weak_error(m, f, 4, 4, 5000, seed=1)
    assert abs(est.estimate) < 1e-12
    assert abs(richardson(m, f, 4, 4, 5000, seed=1)[0]) < 1e-12


def test_bias_policies():
    bad = BiasCheck(1.0, 0.01, 0.1)
    assert not bad.passed and BiasCheck(0.01, 0.1, 0.0).passed
    with pytest.raises(ReferenceBiasError):
        _apply_bias_policy(bad, "raise")
    with pytest.warns(RuntimeWarning):
        _apply_bias_policy(bad, "warn")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _apply_bias_policy(bad, "off")


def test_convergence_study_structure(tmp_path):
    m, f = make_model("bounded"), make_payoff("sin")
    rep = convergence_study(m, f, [1, 2, 4], 8, 4096, seed=2, bias_check="off")
    assert [p.n for p in rep.ladder] == [1, 2, 4]
    assert all(p.M == 4096 and p.stderr > 0 for p in rep.ladder)
    write_ladder_csv(rep, tmp_path / "l.csv")
    rows = list(csv.DictReader(open(tmp_path / "l.csv")))
    assert list(rows[0]) == ["n", "h", "error", "stderr", "M", "excluded"]
    write_plotdata(rep, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().count("\n") == 4
    with pytest.raises(ValueError):
        convergence_study(m, f, [3, 4], 8, 100, seed=2)


def test_bias_check_runs_for_inexact_reference():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = convergence_study(make_model("bounded"), make_payoff("sin"), [2, 4], 8, 4096, seed=2)
    assert rep.bias_check is not None and rep.bias_check.stderr > 0


def test_richardson_study_shares_paths():
    m, f = make_model("gbm"), make_payoff("sin")
    plain, extra = richardson_study(m, f, [4], 4, 4096, seed=5)
    single = richardson(m, f, 4, 4, 4096, seed=5)
    # same fine paths: the extrapolated point is the stand-alone estimate
    assert extra.ladder[0].error == pytest.approx(single[0], abs=1e-15)
    plain, extra = richardson_study(m, f, [2, 4, 8], 4, 4096, seed=5)
    assert [p.n for p in extra.ladder] == [2, 4, 8]
