"""Time grids, the rounding map eta, and coupled Brownian increments.

All path arrays in this package are *time-major*: ``increments[k, p]`` is the
increment over step ``k`` of path ``p``.  Stepping loops then touch contiguous
rows, which is what makes the vectorised schemes fast.

Brownian increments come from numpy's Philox counter-based generator.  Paths
are organised in fixed blocks of ``BLOCK_SIZE``; block ``b`` is keyed by
``(seed, b)`` and filled step-major, so the increment with index ``k`` of path
``p`` is a pure function of ``(seed, p, k, number of fine steps)`` no matter
how many paths are requested or in which order blocks are drawn.

Increments are rounded to the lattice ``2**-40``.  Every partial sum of such
numbers (below ``2**12`` in magnitude) is exact in float64, so coarse
increments are exactly the sums of their fine sub-increments in any
summation order.  The perturbation of the Gaussian law is of order 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BLOCK_SIZE = 4096
LATTICE = 2.0**-40
_REL_TOL = 1e-9


class GridError(ValueError):
    """Raised for inconsistent grid parameters."""


@dataclass(frozen=True)
class DelayGrid:
    """Uniform mesh ``t_k = k*h`` for ``k = -n, ..., N`` with ``h = r/n``.

    For a plain diffusion take ``r = T``; ``n`` is then the number of steps.
    """

    r: float
    n: int
    T: float
    h: float = field(init=False)
    N: int = field(init=False)

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise GridError(f"delay length must be positive, got r={self.r}")
        if int(self.n) != self.n or self.n <= 0:
            raise GridError(f"steps per delay interval must be a positive integer, got n={self.n}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise GridError(f"horizon must be positive, got T={self.T}")
        h = self.r / self.n
        ratio = self.T / h
        N = int(round(ratio))
        if N < 1 or abs(ratio - N) > _REL_TOL * max(1.0, ratio):
            raise GridError(f"horizon not grid-aligned: T={self.T} is not a multiple of h={h}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "N", N)

    @property
    def nodes(self) -> np.ndarray:
        """Nodes ``t_{-n}, ..., t_N``; the endpoints are exactly ``-r`` and ``T``."""
        t = np.arange(-self.n, self.N + 1) * self.h
        t[0] = -self.r
        t[-1] = self.T
        return t

    @property
    def offset(self) -> int:
        """Row of node ``t_0`` in arrays indexed over all nodes."""
        return self.n

    @property
    def n_nodes(self) -> int:
        return self.n + self.N + 1

    def refine(self, kappa: int) -> "DelayGrid":
        """Grid with ``kappa`` times more steps on the same ``[-r, T]``."""
        return DelayGrid(self.r, self.n * int(kappa), self.T)

    def index(self, s: float) -> int:
        """Signed node index ``floor(n*s/r)`` of ``eta(s)``."""
        return int(_floor_index(np.asarray(s, dtype=float), self))


def _floor_index(s: np.ndarray, grid: DelayGrid) -> np.ndarray:
    # floor of n*s/r, corrected with exact comparisons so that k*h <= s < (k+1)*h
    # holds in floating point and nodes k*h map to themselves
    k = np.floor(grid.n * s / grid.r)
    k = np.where((k + 1) * grid.h <= s, k + 1, k)
    k = np.where(k * grid.h > s, k - 1, k)
    return k.astype(np.int64)


def make_grid(r: float, n: int, T: float) -> DelayGrid:
    """Build a :class:`DelayGrid`; ``T`` must be an integer multiple of ``r/n``."""
    return DelayGrid(float(r), n, float(T))


def eta(s, grid: DelayGrid):
    """Round ``s`` down to the grid: ``floor(n*s/r) * r/n``.

    Floor (not truncation) keeps ``eta(s) <= s`` for negative ``s`` as well.
    Accepts scalars or arrays.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < -grid.r * (1 + 1e-12)) or np.any(s_arr > grid.T * (1 + 1e-12)):
        raise GridError(f"time outside [-r, T] = [{-grid.r}, {grid.T}]")
    out = _floor_index(s_arr, grid) * grid.h
    if out.ndim == 0:
        return float(out)
    return out


def delay_offsets(locations, grid: DelayGrid) -> np.ndarray:
    """Integer node offsets ``eta(u)/h`` for delay locations ``u`` in ``[-r, 0]``."""
    u = np.asarray(locations, dtype=float)
    if np.any(u > 0) or np.any(u < -grid.r * (1 + 1e-12)):
        raise GridError("delay locations must lie in [-r, 0]")
    return np.maximum(_floor_index(u, grid), -grid.n)


@dataclass(frozen=True)
class BrownianPath:
    """A batch of Brownian paths on ``grid`` (already at the stated resolution).

    ``increments`` has shape ``(grid.N, n_paths)``.  ``refinement`` records how
    many of these steps make up one step of the coarsest grid the batch was
    generated for; :func:`coarsen` divides it.
    """

    grid: DelayGrid
    increments: np.ndarray
    seed: int
    refinement: int
    first_path: int = 0

    @property
    def n_paths(self) -> int:
        return self.increments.shape[1]

    def W(self) -> np.ndarray:
        """Brownian values at nodes ``t_0..t_N`` (shape ``(N+1, n_paths)``)."""
        out = np.zeros((self.grid.N + 1, self.n_paths))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def _block_generator(seed: int, block: int) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(block)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_block(grid: DelayGrid, kappa: int, seed: int, block: int) -> BrownianPath:
    """Full block ``block`` of ``BLOCK_SIZE`` paths at mesh ``grid.h/kappa``."""
    if int(kappa) != kappa or kappa < 1:
        raise GridError(f"refinement must be a positive integer, got {kappa}")
    fine = grid.refine(kappa)
    gen = _block_generator(seed, block)
    dw = gen.standard_normal((fine.N, BLOCK_SIZE))
    dw *= math.sqrt(fine.h) / LATTICE
    np.rint(dw, out=dw)
    dw *= LATTICE
    return BrownianPath(fine, dw, int(seed), int(kappa), block * BLOCK_SIZE)


def sample_path(grid: DelayGrid, kappa: int, seed: int, n_paths: int = 1, first_path: int = 0) -> BrownianPath:
    """Paths ``first_path .. first_path+n_paths-1`` with ``kappa`` fine steps per step of ``grid``."""
    if n_paths < 1:
        raise GridError("need at least one path")
    stop = first_path + n_paths
    pieces = []
    for b in range(first_path // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE + 1):
        blk = sample_block(grid, kappa, seed, b)
        lo = max(first_path, b * BLOCK_SIZE) - b * BLOCK_SIZE
        hi = min(stop, (b + 1) * BLOCK_SIZE) - b * BLOCK_SIZE
        pieces.append(blk.increments[:, lo:hi])
    inc = pieces[0] if len(pieces) == 1 else np.concatenate(pieces, axis=1)
    return BrownianPath(grid.refine(kappa), np.ascontiguousarray(inc), int(seed), int(kappa), first_path)


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Sum groups of ``factor`` consecutive increments.

    Lattice increments make every such sum exact, so coarsening composes
    (``coarsen(coarsen(p, a), b) == coarsen(p, a*b)`` bitwise) and totals are
    preserved bit for bit.
    """
    factor = int(factor)
    if factor < 1 or path.refinement % factor:
        raise GridError(f"factor {factor} does not divide refinement {path.refinement}")
    if factor == 1:
        return path
    g = path.grid
    coarse_grid = DelayGrid(g.r, g.n // factor, g.T)
    inc = path.increments.reshape(coarse_grid.N, factor, path.n_paths)
    out = inc[:, 0, :].copy()
    for i in range(1, factor):
        out += inc[:, i, :]
    return BrownianPath(coarse_grid, out, path.seed, path.refinement // factor, path.first_path)
