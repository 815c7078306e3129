import numpy as np
import pytest

from weak_euler.euler import euler_delay, euler_diffusion
from weak_euler.grids import BrownianPath, make_grid, sample_path
from weak_euler.malliavin import (first_variation_delay, first_variation_diffusion, malliavin_cov,
                                  restrict_derivative, second_variation_diffusion, stochastic_exponential,
                                  terminal_derivative_delay, terminal_derivative_diffusion)
from weak_euler.models import make_model

EPS = 1e-5


def _bumped(path, m, eps):
    inc = path.increments.copy()
    inc[m] += eps
    return BrownianPath(path.grid, inc, path.seed, path.refinement)


def _fd_tableau(run, path):
    N = path.grid.N
    out = np.zeros((N + 1, N, path.n_paths))
    for m in range(N):
        up = run(_bumped(path, m, EPS)).positive
        dn = run(_bumped(path, m, -EPS)).positive
        out[:, m] = (up - dn) / (2 * EPS)
    return out


def _setup(model, n=4, paths=5):
    path = sample_path(make_grid(model.r, n, model.horizon), 1, seed=13, n_paths=paths)
    return path, euler_delay(model, path)


def _rel_dev(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def test_first_variation_matches_finite_differences(any_model):
    path, X = _setup(any_model)
    tab = first_variation_delay(any_model, X, path)
    fd = _fd_tableau(lambda p: euler_delay(any_model, p), path)
    assert _rel_dev(tab.D, fd) < 1e-6


def test_diffusion_tableau_matches_finite_differences():
    m = make_model("bounded")
    path, X = _setup(m, n=8)
    tab = first_variation_diffusion(m.sigma, m.b, X, path)
    fd = _fd_tableau(lambda p: euler_diffusion(m.sigma, m.b, m.x0, p), path)
    assert _rel_dev(tab.D, fd) < 1e-6
    np.testing.assert_allclose(tab.D, first_variation_delay(m, X, path).D, rtol=1e-13, atol=1e-15)


def test_adaptedness():
    m = make_model("delay")
    path, X = _setup(m)
    D = first_variation_delay(m, X, path).D
    for k in range(D.shape[0]):
        assert np.all(D[k, k:] == 0)


@pytest.mark.parametrize("name", ["gbm", "bounded"])
def test_second_variation_matches_finite_differences(name):
    m = make_model(name)
    path, X = _setup(m, n=5, paths=3)
    tab = first_variation_diffusion(m.sigma, m.b, X, path)
    D2 = second_variation_diffusion(m.sigma, m.b, X, tab, path).D2
    N = path.grid.N
    for m2 in range(N):
        def d_tab(eps):
            p = _bumped(path, m2, eps)
            return first_variation_diffusion(m.sigma, m.b, euler_diffusion(m.sigma, m.b, m.x0, p), p).D
        fd = (d_tab(EPS) - d_tab(-EPS)) / (2 * EPS)
        assert _rel_dev(D2[:, :, m2], fd) < 1e-6
    np.testing.assert_allclose(D2, np.swapaxes(D2, 1, 2))


def test_terminal_rows_by_adjoint(any_model):
    path, X = _setup(any_model, paths=7)
    tab = first_variation_delay(any_model, X, path)
    np.testing.assert_allclose(terminal_derivative_delay(any_model, X, path), tab.D[-1], rtol=1e-12, atol=1e-14)
    if any_model.is_diffusion:
        row = terminal_derivative_diffusion(any_model.sigma, any_model.b, X, path)
        np.testing.assert_allclose(row, tab.D[-1], rtol=1e-12, atol=1e-14)


def test_covariance_and_restriction():
    m = make_model("constant", c=0.3)
    path, X = _setup(m, n=8)
    tab = first_variation_delay(m, X, path)
    np.testing.assert_allclose(malliavin_cov(tab), 0.09, rtol=1e-12)
    row = np.arange(8.0)[:, None] * np.ones((1, 2))
    np.testing.assert_allclose(restrict_derivative(row, 4)[:, 0], [1.5, 5.5])


def test_stochastic_exponential_forms():
    path = sample_path(make_grid(1.0, 16, 1.0), 1, seed=2, n_paths=50)
    s1 = 0.7 * np.ones((16, 50))
    prod = stochastic_exponential(s1, path, "product").E
    expected = np.ones(50)
    for k in range(16):
        expected = expected * (1 + 0.7 * path.increments[k])
    np.testing.assert_allclose(prod[-1], expected, rtol=1e-14)
    ex = stochastic_exponential(s1, path)
    assert np.all(ex.E > 0)
    np.testing.assert_allclose(ex.E * ex.inverse, 1.0, rtol=1e-14)
    np.testing.assert_allclose(ex.E[-1], np.exp(0.7 * path.W()[-1] - 0.245), rtol=1e-12)
    with pytest.raises(ValueError):
        stochastic_exponential(s1, path, "other")
