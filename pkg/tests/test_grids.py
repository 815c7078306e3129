import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weak_euler.grids import (BLOCK_SIZE, LATTICE, GridError, coarsen, delay_offsets, eta, make_grid,
                              sample_block, sample_path)


def test_grid_geometry():
    g = make_grid(1.0, 10, 2.0)
    assert g.h == pytest.approx(0.1)
    assert g.N == 20
    assert g.offset == 10
    t = g.nodes
    assert t[0] == -1.0 and t[-1] == 2.0 and len(t) == g.n_nodes == 31


@pytest.mark.parametrize("r,n,T", [(1.0, 3, 1.1), (0.0, 4, 1.0), (1.0, 0, 1.0), (1.0, 2.5, 1.0), (1.0, 4, -1.0)])
def test_bad_grids_rejected(r, n, T):
    with pytest.raises(GridError):
        make_grid(r, n, T)


def test_eta_nodes_are_fixed_points():
    g = make_grid(1.0, 10, 1.0)
    for k in range(-10, 11):
        assert eta(g.nodes[k + 10], g) == pytest.approx(g.nodes[k + 10], abs=1e-15)


def test_eta_rounds_down_for_negative_times():
    g = make_grid(1.0, 4, 1.0)
    assert eta(-0.1, g) == -0.25
    assert eta(0.3, g) == 0.25
    assert eta(-1.0, g) == -1.0
    np.testing.assert_array_equal(eta(np.array([0.0, 0.99, 1.0]), g), [0.0, 0.75, 1.0])


def test_eta_outside_range():
    g = make_grid(1.0, 4, 1.0)
    with pytest.raises(GridError):
        eta(1.5, g)
    with pytest.raises(GridError):
        eta(-1.5, g)


@given(st.floats(-1.0, 2.0), st.sampled_from([1, 3, 4, 7, 16]))
def test_eta_brackets(s, n):
    g = make_grid(1.0, n, 2.0)
    e = eta(s, g)
    assert e <= s < e + g.h + 1e-15


def test_delay_offsets():
    g = make_grid(1.0, 8, 1.0)
    np.testing.assert_array_equal(delay_offsets([0.0, -1.0, -0.5, -1 / math.sqrt(2)], g), [0, -8, -4, -6])
    with pytest.raises(GridError):
        delay_offsets([0.1], g)


def test_paths_are_reproducible_and_sliceable():
    g = make_grid(1.0, 4, 1.0)
    big = sample_path(g, 2, seed=7, n_paths=BLOCK_SIZE + 20)
    part = sample_path(g, 2, seed=7, n_paths=30, first_path=BLOCK_SIZE - 10)
    np.testing.assert_array_equal(big.increments[:, BLOCK_SIZE - 10:], part.increments)
    again = sample_path(g, 2, seed=7, n_paths=BLOCK_SIZE + 20)
    np.testing.assert_array_equal(big.increments, again.increments)
    other = sample_path(g, 2, seed=8, n_paths=10)
    assert not np.array_equal(other.increments, big.increments[:, :10])


def test_increments_on_lattice():
    blk = sample_block(make_grid(1.0, 8, 1.0), 4, seed=1, block=0)
    q = blk.increments / LATTICE
    np.testing.assert_array_equal(q, np.rint(q))


def test_coarsening_is_exact_and_composes():
    g = make_grid(1.0, 2, 1.0)
    p = sample_path(g, 8, seed=3, n_paths=50)
    two_step = coarsen(coarsen(p, 2), 4)
    one_step = coarsen(p, 8)
    np.testing.assert_array_equal(two_step.increments, one_step.increments)
    np.testing.assert_array_equal(one_step.W()[-1], p.W()[-1])
    assert one_step.grid.n == 2 and one_step.refinement == 1
    with pytest.raises(GridError):
        coarsen(p, 3)


def test_brownian_moments():
    g = make_grid(1.0, 4, 2.0)
    W = sample_path(g, 1, seed=11, n_paths=40000).W()
    assert abs(W[-1].mean()) < 5 * math.sqrt(2.0 / 40000)
    assert W[-1].var() == pytest.approx(2.0, rel=0.05)
    assert np.all(W[0] == 0)
