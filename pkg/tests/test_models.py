import numpy as np
import pytest

from weak_euler.models import (DelayMeasure, DelayModel, InitialSegment, SmoothFn1D, TestFunction,
                               builtin_catalog, derivative_mismatch, make_model, make_payoff, validate)


def test_catalog_contents():
    cat = builtin_catalog()
    for key in ("gbm", "bounded", "delay", "two_atom", "misaligned", "constant",
                "f_sin", "f_cos", "f_square", "f_indicator"):
        assert key in cat


def test_every_catalog_model_validates(any_model):
    rep = validate(any_model)
    assert rep.passed, str(rep)


def test_payoff_derivatives():
    for name in ("sin", "cos", "square", "identity"):
        f = make_payoff(name)
        assert derivative_mismatch(f.eval, f.d1) < 1e-6
        assert derivative_mismatch(f.d1, f.d2) < 1e-6


def test_validation_reports_instead_of_raising():
    wrong = SmoothFn1D(np.sin, np.sin, lambda x: -np.sin(x), lambda x: -np.cos(x))
    model = DelayModel(wrong, SmoothFn1D.constant(0.0), DelayMeasure((0.5,), (-1.0,)),
                       InitialSegment.constant(0.0), 1.0)
    rep = validate(model)
    names = {c.name for c in rep.failed()}
    assert {"sigma.d1", "nu.locations", "nu.weights"} <= names


def test_ellipticity_floor_checked():
    fake = SmoothFn1D(np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), ellipticity_floor=0.5)
    model = DelayModel(fake, SmoothFn1D.constant(0.0), DelayMeasure.dirac(), InitialSegment.constant(0.0), 1.0)
    assert "sigma.ellipticity" in {c.name for c in validate(model).failed()}


def test_measure_and_segment():
    nu = DelayMeasure((0.0, -1.0), (0.5, 0.5))
    assert nu.total_mass == 1.0
    assert nu.atoms == [(0.0, 0.5), (-1.0, 0.5)]
    with pytest.raises(ValueError):
        DelayMeasure((0.0,), (1.0, 2.0))
    m = make_model("delay")
    assert m.x0 == 1.0
    assert float(m.xi(np.array(-1.0))) == pytest.approx(0.9)
    assert not m.is_diffusion and make_model("gbm").is_diffusion


def test_model_parameters_and_unknown_names():
    assert make_model("gbm", sigma0=0.5).sigma.d1(np.array(3.0)) == 0.5
    assert make_model("delay", T=3.0).horizon == 3.0
    with pytest.raises(KeyError):
        make_model("nope")
    with pytest.raises(KeyError):
        make_payoff("nope")


def test_indicator():
    f = TestFunction.indicator(0.5)
    np.testing.assert_array_equal(f(np.array([0.0, 0.5, 0.7])), [0.0, 0.0, 1.0])
    assert f.kind == "indicator" and f.threshold == 0.5


def test_exact_gbm_solution():
    m = make_model("gbm", sigma0=0.3, x0=2.0)
    assert m.exact_terminal(np.array(0.0), 1.0) == pytest.approx(2.0 * np.exp(-0.045))
