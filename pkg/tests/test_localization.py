import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from weak_euler.localization import (SmoothCutoff, coupled_localization, median_threshold, psi_decay_study,
                                     psi_sample, smooth_cutoff)
from weak_euler.models import make_model


def test_cutoff_sandwich():
    psi = smooth_cutoff()
    x = np.linspace(-1, 1, 20001)
    v = psi(x)
    assert np.all(v[x <= 0.125] == 1.0)
    assert np.all(v[x >= 0.25] == 0.0)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) <= 0)
    assert psi(0.1875) == pytest.approx(0.5)


def test_cutoff_is_smooth_at_the_edges():
    # a linear ramp would move by 0.08 here; the flat edges move by ~1e-5
    psi = SmoothCutoff()
    assert 1.0 - psi(0.125 + 0.01) < 1e-4
    assert psi(0.25 - 0.01) < 1e-4


def test_identical_derivatives_give_full_weight():
    D = np.random.default_rng(0).normal(size=(8, 5))
    same = psi_sample(np.repeat(D[:4], 2, axis=0), D[:4], 0.125)
    np.testing.assert_array_equal(same.discrepancy, 0.0)
    np.testing.assert_array_equal(same.psi_value, 1.0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (8, 3), elements=st.floats(-3, 3)), arrays(float, (4, 3), elements=st.floats(-3, 3)))
def test_inclusion_wherever_cutoff_is_active(Df, Dc):
    s = psi_sample(Df, Dc, 0.125)
    active = s.psi_value > 0
    assert np.all(s.inclusion_margin[active] >= -1e-12 * (1 + s.gamma_X[active]))


def test_coupled_sample_on_elliptic_model():
    s = coupled_localization(make_model("bounded"), 8, 8, seed=0, count=500)
    assert s.degenerate == 0
    assert np.all(s.gamma_X > 0.3 ** 2 * 0.99)
    assert np.all(s.ratio < 0.125)


def test_decay_study():
    rep = psi_decay_study(make_model("bounded"), [2, 4, 8], 8, 2000, seed=1)
    assert rep.monotone and rep.inclusion_ok
    assert len(rep.rows()) == 3 and rep.passed


def test_decay_study_needs_ellipticity():
    with pytest.raises(ValueError):
        psi_decay_study(make_model("gbm"), [2, 4], 4, 100, seed=0)


def test_median_threshold_splits_paths():
    m = make_model("bounded")
    K = median_threshold(m, n=64, M=20_000, seed=3)
    assert abs(K) < 0.2
