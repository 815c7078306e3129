import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weak_euler.error_equation import (ForcingPath, LinearOperatorSpec, apply_operator, solve_picard,
                                       solve_triangular, verify_error_identity)
from weak_euler.grids import make_grid, sample_path
from weak_euler.models import DelayMeasure


def test_identity_holds_on_every_catalog_model(any_model):
    g = make_grid(any_model.r, 4, any_model.horizon)
    rep = verify_error_identity(any_model, sample_path(g, 8, seed=21, n_paths=64), g)
    assert rep.max_residual < 1e-9
    assert rep.picard_iterations <= rep.n_steps
    assert rep.solver_gap < 1e-12
    assert rep.passed


def test_apply_operator_shifts_and_zeroes_history():
    g = make_grid(1.0, 2, 2.0)
    Y = np.arange(g.n_nodes, dtype=float) + 1.0        # rows t_-2 .. t_4
    spec = LinearOperatorSpec("delay_alpha", np.full(g.N, 2.0), DelayMeasure.dirac(-1.0))
    np.testing.assert_array_equal(apply_operator(spec, Y, g), [0, 0, 2 * 3, 2 * 4])
    scal = LinearOperatorSpec("scalar_kernel", np.arange(g.N, dtype=float))
    np.testing.assert_array_equal(apply_operator(scal, Y, g), np.arange(4) * Y[2:6])


def test_unknown_kind():
    with pytest.raises(ValueError):
        LinearOperatorSpec("other", np.ones(3))


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**32))
def test_linear_equation_against_recursion(a, bbar, seed):
    g = make_grid(1.0, 8, 1.0)
    path = sample_path(g, 1, seed=seed, n_paths=3)
    W = path.W()
    G = ForcingPath(g, np.sin(W) + 0.1 * W * W)
    alpha = LinearOperatorSpec("scalar_kernel", np.full(8, a))
    beta = LinearOperatorSpec("scalar_kernel", np.full(8, bbar))
    Y = solve_triangular(alpha, beta, G, path)
    ref = np.zeros(3)
    for k in range(8):
        ref = ref * (1 + a * path.increments[k] + bbar * g.h) + (G.G[k + 1] - G.G[k])
    np.testing.assert_allclose(Y[-1], ref, rtol=1e-12, atol=1e-12)
    Yp, it = solve_picard(alpha, beta, G, path)
    assert it <= 8
    np.testing.assert_allclose(Yp, Y, rtol=0, atol=1e-12)


def test_picard_on_delay_operator_settles_early():
    g = make_grid(1.0, 4, 2.0)
    path = sample_path(g, 1, seed=1, n_paths=5)
    G = ForcingPath(g, path.W())
    nu = DelayMeasure.dirac(-1.0)
    alpha = LinearOperatorSpec("delay_alpha", np.ones(g.N), nu)
    beta = LinearOperatorSpec("delay_beta", np.ones(g.N), nu)
    Yp, it = solve_picard(alpha, beta, G, path)
    # lag of a full delay interval: the iteration is exact after N/n + 1 sweeps
    assert it <= g.N // g.n + 2
    np.testing.assert_array_equal(Yp, solve_triangular(alpha, beta, G, path))
