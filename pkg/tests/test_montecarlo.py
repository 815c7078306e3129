import numpy as np

from weak_euler.grids import BLOCK_SIZE
from weak_euler.montecarlo import block_ranges, mean_and_stderr, run_blocks, set_default_threads, default_threads


def test_block_ranges_align_to_rng_blocks():
    assert block_ranges(10, first=BLOCK_SIZE - 4) == [(BLOCK_SIZE - 4, 4), (BLOCK_SIZE, 6)]
    assert sum(c for _, c in block_ranges(3 * BLOCK_SIZE + 1)) == 3 * BLOCK_SIZE + 1


def test_results_independent_of_threads():
    task = lambda start, count: {"x": np.arange(start, start + count, dtype=float) ** 0.5}
    one = run_blocks(task, 3 * BLOCK_SIZE + 17, threads=1)["x"]
    four = run_blocks(task, 3 * BLOCK_SIZE + 17, threads=4)["x"]
    np.testing.assert_array_equal(one, four)
    np.testing.assert_allclose(one, np.arange(3 * BLOCK_SIZE + 17) ** 0.5, rtol=1e-15)


def test_default_threads_override():
    set_default_threads(3)
    assert default_threads() == 3
    set_default_threads(None)
    assert default_threads() >= 1


def test_mean_and_stderr():
    m, se = mean_and_stderr(np.array([1.0, 2.0, 3.0, 4.0]))
    assert m == 2.5 and abs(se - np.std([1, 2, 3, 4], ddof=1) / 2) < 1e-15
    assert np.isnan(mean_and_stderr(np.array([1.0]))[1])
