"""Discrete Malliavin derivatives of Euler functionals.

``D[k, m]`` is the partial derivative of the scheme at node ``t_k`` with
respect to the increment ``dW_m`` over ``[t_m, t_{m+1})`` (0-based), which is
the Malliavin derivative ``D_u X_{t_k}`` for ``u`` in that cell.  Entries with
``m >= k`` vanish by adaptedness.

Full tableaux are ``O(N^2 P)`` in memory and meant for checks on small grids;
the ``terminal_derivative_*`` functions return the last row in ``O(N P)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .euler import PathValues, delay_arguments
from .grids import BrownianPath, DelayGrid, delay_offsets
from .models import DelayModel, SmoothFn1D


@dataclass(frozen=True)
class VariationTableau:
    """``D[k, m]`` for nodes ``k = 0..N`` and cells ``m = 0..N-1``."""

    grid: DelayGrid
    D: np.ndarray

    def row(self, k: int) -> np.ndarray:
        return self.D[k]


@dataclass(frozen=True)
class SecondVariationTableau:
    """``D2[k, m1, m2]``: second derivative of node ``k`` in ``dW_m1`` and ``dW_m2``."""

    grid: DelayGrid
    D2: np.ndarray


@dataclass(frozen=True)
class ExponentialPath:
    """Discrete stochastic exponential ``E[k]`` at nodes ``t_0..t_N``."""

    E: np.ndarray
    log: np.ndarray | None = None

    @property
    def inverse(self) -> np.ndarray:
        if self.log is not None:
            return np.exp(-self.log)
        return 1.0 / self.E


def first_variation_diffusion(sigma: SmoothFn1D, b: SmoothFn1D, Xbar: PathValues, path: BrownianPath) -> VariationTableau:
    g = Xbar.grid
    X = Xbar.positive
    N, P = g.N, X.shape[1]
    D = np.zeros((N + 1, N, P))
    for k in range(N):
        growth = 1.0 + sigma.d1(X[k]) * path.increments[k] + b.d1(X[k]) * g.h
        D[k + 1, :k] = D[k, :k] * growth
        D[k + 1, k] = sigma.eval(X[k])
    return VariationTableau(g, D)


def first_variation_delay(model: DelayModel, Xbar: PathValues, path: BrownianPath,
                          grid: DelayGrid | None = None) -> VariationTableau:
    g = grid or Xbar.grid
    A = delay_arguments(model, Xbar)
    offsets = delay_offsets(model.nu.locations, g)
    N, P = g.N, A.shape[1]
    D = np.zeros((N + 1, N, P))
    for k in range(N):
        dA = np.zeros((N, P))
        for d, w in zip(offsets, model.nu.weights):
            if k + d >= 0:
                dA += w * D[k + d]
        slope = model.sigma.d1(A[k]) * path.increments[k] + model.b.d1(A[k]) * g.h
        D[k + 1] = D[k] + slope * dA
        D[k + 1, k] = model.sigma.eval(A[k])
    return VariationTableau(g, D)


def second_variation_diffusion(sigma: SmoothFn1D, b: SmoothFn1D, Xbar: PathValues,
                               tableau: VariationTableau, path: BrownianPath) -> SecondVariationTableau:
    """Differentiate the first-variation recursion once more; diffusion only."""
    g = Xbar.grid
    X = Xbar.positive
    D = tableau.D
    N, P = g.N, X.shape[1]
    D2 = np.zeros((N + 1, N, N, P))
    for k in range(N):
        w = path.increments[k]
        growth = 1.0 + sigma.d1(X[k]) * w + b.d1(X[k]) * g.h
        curv = sigma.d2(X[k]) * w + b.d2(X[k]) * g.h
        Dk = D[k, :k]
        D2[k + 1, :k, :k] = D2[k, :k, :k] * growth + curv * Dk[:, None, :] * Dk[None, :, :]
        cross = sigma.d1(X[k]) * Dk
        D2[k + 1, :k, k] = cross
        D2[k + 1, k, :k] = cross
    return SecondVariationTableau(g, D2)


def terminal_derivative_delay(model: DelayModel, Xbar: PathValues, path: BrownianPath) -> np.ndarray:
    """Last tableau row ``D[N, :]`` by a backward adjoint sweep; shape ``(N, P)``."""
    g = Xbar.grid
    A = delay_arguments(model, Xbar)
    offsets = delay_offsets(model.nu.locations, g)
    N, P = g.N, A.shape[1]
    # lam[k] = derivative of X_N in X_k, rows shifted by n for negative nodes
    lam = np.zeros((N + 1 + g.n, P))
    lam[g.n + N] = 1.0
    out = np.empty((N, P))
    for k in range(N - 1, -1, -1):
        nxt = lam[g.n + k + 1]
        out[k] = nxt * model.sigma.eval(A[k])
        slope = nxt * (model.sigma.d1(A[k]) * path.increments[k] + model.b.d1(A[k]) * g.h)
        lam[g.n + k] += nxt
        for d, w in zip(offsets, model.nu.weights):
            lam[g.n + k + d] += w * slope
    return out


def terminal_derivative_diffusion(sigma: SmoothFn1D, b: SmoothFn1D, Xbar: PathValues, path: BrownianPath) -> np.ndarray:
    g = Xbar.grid
    X = Xbar.positive
    lam = np.ones(X.shape[1])
    out = np.empty((g.N, X.shape[1]))
    for k in range(g.N - 1, -1, -1):
        out[k] = lam * sigma.eval(X[k])
        lam = lam * (1.0 + sigma.d1(X[k]) * path.increments[k] + b.d1(X[k]) * g.h)
    return out


def malliavin_cov(tableau: VariationTableau, k: int | None = None) -> np.ndarray:
    """``sum_m D[k, m]^2 h``, the covariance of node ``k`` (default: terminal)."""
    k = tableau.grid.N if k is None else k
    return np.sum(tableau.D[k] ** 2, axis=0) * tableau.grid.h


def restrict_derivative(row: np.ndarray, factor: int) -> np.ndarray:
    """Average fine-cell derivatives over each coarse cell."""
    N, P = row.shape
    return row.reshape(N // factor, factor, P).mean(axis=1)


def stochastic_exponential(sigma1, path: BrownianPath, form: str = "exponential") -> ExponentialPath:
    """Discrete solution of ``dE = sigma1 E dW``, ``E_0 = 1``.

    ``form="exponential"`` uses ``exp(sum sigma1 dW - sum sigma1^2 h / 2)``,
    which stays positive.  ``form="product"`` uses ``prod (1 + sigma1 dW)``,
    the exact discrete solution of the linear recursion, which the duality
    identities need.
    """
    inc = path.increments
    s1 = np.broadcast_to(np.asarray(sigma1, dtype=float).reshape(inc.shape[0], -1), inc.shape)
    E = np.ones((inc.shape[0] + 1, inc.shape[1]))
    if form == "exponential":
        L = np.zeros_like(E)
        np.cumsum(s1 * inc - 0.5 * s1 * s1 * path.grid.h, axis=0, out=L[1:])
        return ExponentialPath(np.exp(L), L)
    if form == "product":
        np.cumprod(1.0 + s1 * inc, axis=0, out=E[1:])
        return ExponentialPath(E)
    raise ValueError(f"unknown form {form!r}")
