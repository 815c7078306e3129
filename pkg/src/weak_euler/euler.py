"""Euler schemes for diffusions and delay equations.

State arrays cover all nodes ``t_{-n} .. t_N`` with row ``grid.offset`` at
``t_0``; negative rows hold the initial segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import BrownianPath, DelayGrid, GridError, delay_offsets
from .models import DelayModel, InitialSegment, SmoothFn1D

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# shifted to [0, 1]
GL_NODES = 0.5 * (GL_NODES + 1.0)
GL_WEIGHTS = 0.5 * GL_WEIGHTS


@dataclass(frozen=True)
class PathValues:
    """Scheme values at every node; ``values`` has shape ``(n + N + 1, n_paths)``."""

    grid: DelayGrid
    values: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        """Rows for ``t_0 .. t_N``."""
        return self.values[self.grid.offset:]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def at(self, k: int) -> np.ndarray:
        """Values at signed node index ``k``."""
        return self.values[self.grid.offset + k]

    def restrict(self, factor: int) -> "PathValues":
        """Subsample to a grid ``factor`` times coarser."""
        g = self.grid
        if g.n % factor:
            raise GridError(f"factor {factor} does not divide n={g.n}")
        coarse = DelayGrid(g.r, g.n // factor, g.T)
        return PathValues(coarse, self.values[::factor])


@dataclass(frozen=True)
class FrozenCoefficients:
    """Coefficients along a coupled pair, one row per step of the finer grid.

    ``sigma_tilde``/``b_tilde`` are the coarse scheme's frozen coefficients,
    ``sigma1``/``b1`` the averaged derivatives along the chord between the
    fine argument and the frozen coarse argument.
    """

    sigma_tilde: np.ndarray
    b_tilde: np.ndarray
    sigma1: np.ndarray
    b1: np.ndarray
    fine_args: np.ndarray
    coarse_args: np.ndarray


def _check_grid(path: BrownianPath, grid: DelayGrid | None) -> DelayGrid:
    if grid is None:
        return path.grid
    if grid.n != path.grid.n or grid.N != path.grid.N:
        raise GridError("path resolution does not match grid")
    return grid


def _initial_rows(xi: InitialSegment, grid: DelayGrid, n_paths: int) -> np.ndarray:
    values = np.empty((grid.n_nodes, n_paths))
    t = grid.nodes[: grid.offset + 1]
    values[: grid.offset + 1] = np.asarray(xi(t), dtype=float).reshape(-1, 1)
    return values


def _abort_if_nonfinite(x: np.ndarray, k: int):
    if not np.all(np.isfinite(x)):
        bad = int(np.count_nonzero(~np.isfinite(x)))
        raise FloatingPointError(f"non-finite state at step {k} on {bad} paths (coefficient blow-up)")


def _stepper(values, offsets, weights, sigma, b, inc, h, start):
    single = len(offsets) == 1
    d0, w0 = int(offsets[0]), float(weights[0])
    N = inc.shape[0]
    for k in range(N):
        row = start + k
        if single:
            arg = values[row + d0] if w0 == 1.0 else w0 * values[row + d0]
        else:
            arg = w0 * values[row + d0]
            for d, w in zip(offsets[1:], weights[1:]):
                arg = arg + w * values[row + d]
        values[row + 1] = values[row] + sigma.eval(arg) * inc[k] + b.eval(arg) * h
        if k % 64 == 63:
            _abort_if_nonfinite(values[row + 1], k)
    _abort_if_nonfinite(values[-1], N - 1)


def euler_diffusion(sigma: SmoothFn1D, b: SmoothFn1D, x0: float, path: BrownianPath) -> PathValues:
    """``X_{k+1} = X_k + sigma(X_k) dW_k + b(X_k) h`` on the grid of ``path``.

    The grid is taken with ``r = T`` in mind but any grid works; only the
    single initial row ``t_0`` is used.
    """
    grid = path.grid
    values = _initial_rows(InitialSegment.constant(x0), grid, path.n_paths)
    _stepper(values, (0,), (1.0,), sigma, b, path.increments, grid.h, grid.offset)
    return PathValues(grid, values)


def euler_delay(model: DelayModel, path: BrownianPath, grid: DelayGrid | None = None) -> PathValues:
    """Euler scheme of the delay equation with arguments ``X(t_k + eta(u_j))``.

    For ``nu = delta_0`` the traversal is that of :func:`euler_diffusion`, so
    both return bit-identical values.
    """
    grid = _check_grid(path, grid)
    offsets = delay_offsets(model.nu.locations, grid)
    values = _initial_rows(model.xi, grid, path.n_paths)
    _stepper(values, offsets, model.nu.weights, model.sigma, model.b, path.increments, grid.h, grid.offset)
    return PathValues(grid, values)


def reference_solution(model: DelayModel, fine_path: BrownianPath) -> PathValues:
    """Delay Euler on the fine mesh of ``fine_path``; a proxy for the exact
    solution with bias of order ``h / refinement``."""
    return euler_delay(model, fine_path)


def delay_arguments(model: DelayModel, pv: PathValues) -> np.ndarray:
    """``sum_j w_j X(t_k + eta(u_j))`` for ``k = 0 .. N-1``; shape ``(N, P)``."""
    g = pv.grid
    offsets = delay_offsets(model.nu.locations, g)
    start = g.offset
    out = None
    for d, w in zip(offsets, model.nu.weights):
        term = pv.values[start + d: start + d + g.N]
        term = term.copy() if w == 1.0 else w * term
        out = term if out is None else out + term
    return out


def chord_average(fn, x, y) -> np.ndarray:
    """``int_0^1 fn(a x + (1 - a) y) da`` by 16-point Gauss-Legendre."""
    out = np.zeros(np.broadcast(x, y).shape)
    for a, w in zip(GL_NODES, GL_WEIGHTS):
        out += w * fn(a * x + (1 - a) * y)
    return out


def _refinement(fine: DelayGrid, coarse: DelayGrid) -> int:
    kappa = fine.n // coarse.n
    if kappa * coarse.n != fine.n or fine.N != kappa * coarse.N:
        raise GridError("fine grid is not a refinement of the coarse grid")
    return kappa


def frozen_coefficients(model: DelayModel, X_path: PathValues, Xbar_path: PathValues,
                        grid: DelayGrid | None = None) -> FrozenCoefficients:
    """Frozen and chord-averaged coefficients for the coupled pair.

    ``X_path`` may sit on any refinement of ``Xbar_path``'s grid; rows of the
    result follow the finer grid, and the coarse argument is held constant
    over each coarse cell.
    """
    coarse = grid or Xbar_path.grid
    kappa = _refinement(X_path.grid, coarse)
    A = delay_arguments(model, X_path)
    Abar = np.repeat(delay_arguments(model, Xbar_path), kappa, axis=0)
    s1 = chord_average(model.sigma.d1, A, Abar)
    b1 = chord_average(model.b.d1, A, Abar)
    return FrozenCoefficients(model.sigma.eval(Abar), model.b.eval(Abar), s1, b1, A, Abar)


def continuous_euler(model: DelayModel, Xbar: PathValues, fine_path: BrownianPath) -> PathValues:
    """The piecewise continuous Euler process sampled on the fine mesh.

    Inside coarse cell ``c`` it moves with the frozen coefficients:
    ``X(t) = X_c + sigma(A_c)(W_t - W_c) + b(A_c)(t - t_c)``; on negative
    times it is the initial segment.  Coarse nodes carry ``Xbar`` unchanged.
    """
    coarse = Xbar.grid
    fine = fine_path.grid
    kappa = _refinement(fine, coarse)
    P = fine_path.n_paths
    Abar = delay_arguments(model, Xbar)
    out = _initial_rows(model.xi, fine, P)
    inc = fine_path.increments.reshape(coarse.N, kappa, P)
    dW = np.zeros((coarse.N, kappa, P))
    np.cumsum(inc[:, :-1, :], axis=1, out=dW[:, 1:, :])
    steps = np.arange(kappa)[None, :, None] * fine.h
    sig = model.sigma.eval(Abar)[:, None, :]
    drift = model.b.eval(Abar)[:, None, :]
    pos = Xbar.positive[:-1][:, None, :] + sig * dW + drift * steps
    pos[:, 0, :] = Xbar.positive[:-1]
    out[fine.offset: fine.offset + fine.N] = pos.reshape(fine.N, P)
    out[-1] = Xbar.terminal
    return PathValues(fine, out)
