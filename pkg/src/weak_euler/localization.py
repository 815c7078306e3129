"""Localization of irregular payoffs.

The cutoff ``Psi`` is applied to the relative derivative discrepancy
``int (D_u X_T - D_u Xbar_T)^2 du / gamma_X``.  On paths where it is nonzero
the covariance of every convex combination of ``X_T`` and ``Xbar_T`` stays
above ``gamma_X / 4``.

Derivatives of the fine reference live on fine cells; the coarse scheme's
derivative is constant on each coarse cell, and all ``du`` integrals are
taken on the fine cells, so every quantity uses one ``L^2(du)`` inner
product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .euler import euler_delay
from .grids import coarsen, make_grid, sample_path
from .malliavin import terminal_derivative_delay
from .models import DelayModel, TestFunction
from .montecarlo import run_blocks
from .weak_error import WeakErrorReport, _check_ladder, convergence_study

INCLUSION_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
INCLUSION_SLACK = 1e-12
GAMMA_FLOOR = 1e-14


def _q(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class SmoothCutoff:
    """C-infinity step from 1 (below ``lower``) to 0 (above ``upper``)."""

    lower: float = 0.125
    upper: float = 0.25

    def eval(self, x):
        t = (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)
        a, b = _q(1.0 - t), _q(t)
        out = a / (a + b)
        return float(out) if out.ndim == 0 else out

    __call__ = eval


def smooth_cutoff() -> SmoothCutoff:
    return SmoothCutoff()


@dataclass
class LocalizationSample:
    """Per-path localization quantities (arrays over paths)."""

    psi_value: np.ndarray
    gamma_X: np.ndarray
    discrepancy: np.ndarray
    inclusion_margin: np.ndarray = None
    degenerate: int = 0

    @property
    def ratio(self) -> np.ndarray:
        return self.discrepancy / self.gamma_X


def psi_sample(D_fine: np.ndarray, D_coarse: np.ndarray, fine_h: float,
               cutoff: SmoothCutoff | None = None) -> LocalizationSample:
    """Localization from terminal derivative rows.

    ``D_fine`` has shape ``(N_f, P)`` and ``D_coarse`` ``(N_c, P)`` with
    ``N_f`` a multiple of ``N_c``.  ``inclusion_margin`` is, per path, the
    smallest ``gamma(a X + (1-a) Xbar) - gamma_X / 4`` over the five-point
    ``a`` grid (only meaningful where ``psi_value > 0``).
    """
    cutoff = cutoff or SmoothCutoff()
    kappa = D_fine.shape[0] // D_coarse.shape[0]
    Dc = np.repeat(D_coarse, kappa, axis=0)
    gamma = np.sum(D_fine * D_fine, axis=0) * fine_h
    disc = np.sum((D_fine - Dc) ** 2, axis=0) * fine_h
    degenerate = int(np.count_nonzero(gamma < GAMMA_FLOOR))
    ratio = disc / np.maximum(gamma, GAMMA_FLOOR)
    psi = np.asarray(cutoff(ratio))
    margin = np.full(gamma.shape, np.inf)
    for a in INCLUSION_GRID:
        mix = a * D_fine + (1 - a) * Dc
        g = np.sum(mix * mix, axis=0) * fine_h
        margin = np.minimum(margin, g - gamma / 4)
    return LocalizationSample(psi, gamma, disc, margin, degenerate)


def coupled_localization(model: DelayModel, n: int, kappa: int, seed: int, count: int, first: int = 0,
                         cutoff: SmoothCutoff | None = None) -> LocalizationSample:
    """Sample ``count`` coupled paths at ``n`` steps with a ``kappa``-fold reference."""
    grid = make_grid(model.r, n, model.horizon)
    fine = sample_path(grid, kappa, seed, count, first)
    coarse = coarsen(fine, kappa)
    X = euler_delay(model, fine)
    Xbar = euler_delay(model, coarse)
    Df = terminal_derivative_delay(model, X, fine)
    Dc = terminal_derivative_delay(model, Xbar, coarse)
    return psi_sample(Df, Dc, fine.grid.h, cutoff)


@dataclass
class PsiDecayReport:
    n: list
    h: list
    fraction: list
    stderr: list
    mean_psi: list
    gamma_quantiles: list
    M: int
    monotone: bool
    slope: float
    resolvable: list = field(default_factory=list)
    inclusion_ok: bool = True
    inclusion_worst: float = 0.0
    degenerate_paths: int = 0
    mean_ratio: list = field(default_factory=list)
    max_ratio: list = field(default_factory=list)

    @property
    def faster_than_resolvable(self) -> bool:
        return not any(self.resolvable)

    @property
    def passed(self) -> bool:
        slope_ok = self.faster_than_resolvable or sum(self.resolvable) < 2 or self.slope > 1
        return self.monotone and slope_ok and self.inclusion_ok

    def rows(self):
        return [{"n": n, "h": h, "fraction": p, "stderr": s}
                for n, h, p, s in zip(self.n, self.h, self.fraction, self.stderr)]


def psi_decay_study(model: DelayModel, n_ladder, kappa: int, M: int, seed: int,
                    threads: int | None = None) -> PsiDecayReport:
    """Empirical ``P(Psi != 1)`` per step size, sharing one reference at ``max(n) * kappa``.

    A fraction counts as resolvable when it exceeds the floor ``10/M``; the
    log-log slope is fitted through resolvable points only (two suffice).
    """
    if model.sigma.ellipticity_floor <= 0:
        raise ValueError("localization study needs a uniformly elliptic model")
    ladder = _check_ladder(n_ladder)
    base = make_grid(model.r, ladder[0], model.horizon)
    total = (ladder[-1] // ladder[0]) * int(kappa)

    def task(start, count):
        fine = sample_path(base, total, seed, count, start)
        X = euler_delay(model, fine)
        Df = terminal_derivative_delay(model, X, fine)
        out = {}
        for n in ladder:
            coarse = coarsen(fine, total * ladder[0] // n)
            Dc = terminal_derivative_delay(model, euler_delay(model, coarse), coarse)
            s = psi_sample(Df, Dc, fine.grid.h)
            psi_pos = s.psi_value > 0
            out[f"psi{n}"] = s.psi_value
            out[f"ratio{n}"] = s.ratio
            out[f"incl{n}"] = np.where(psi_pos, s.inclusion_margin, np.inf)
            out[f"deg{n}"] = np.array([s.degenerate])
        out["gamma"] = s.gamma_X
        return out

    sims = run_blocks(task, M, threads)
    frac, se, mean_psi, resolvable, mean_ratio, max_ratio = [], [], [], [], [], []
    worst = math.inf
    deg = 0
    for n in ladder:
        psi = sims[f"psi{n}"]
        p = float(np.mean(psi < 1.0))
        frac.append(p)
        se.append(math.sqrt(max(p * (1 - p), 0.0) / M))
        mean_psi.append(float(np.mean(psi)))
        mean_ratio.append(float(np.mean(sims[f"ratio{n}"])))
        max_ratio.append(float(np.max(sims[f"ratio{n}"])))
        resolvable.append(p > 10.0 / M)
        worst = min(worst, float(np.min(sims[f"incl{n}"])))
        deg += int(np.sum(sims[f"deg{n}"]))
    q = np.quantile(sims["gamma"], [0.0, 0.01, 0.5]).tolist()
    monotone = all(frac[i + 1] <= frac[i] for i in range(len(frac) - 1))
    h = [model.r / n for n in ladder]
    idx = [i for i, ok in enumerate(resolvable) if ok]
    slope = float("nan")
    if len(idx) >= 2:
        x = np.log([h[i] for i in idx])
        y = np.log([frac[i] for i in idx])
        slope = float(np.polyfit(x, y, 1)[0])
    return PsiDecayReport(ladder, h, frac, se, mean_psi, q, M, monotone, slope, resolvable,
                          worst >= -INCLUSION_SLACK, worst, deg, mean_ratio, max_ratio)


def median_threshold(model: DelayModel, n: int = 256, M: int = 100_000, seed: int = 0,
                     threads: int | None = None) -> float:
    """Median of the fine Euler terminal value, used as indicator threshold."""
    grid = make_grid(model.r, n, model.horizon)

    def task(start, count):
        return {"x": euler_delay(model, sample_path(grid, 1, seed, count, start)).terminal}

    return float(np.median(run_blocks(task, M, threads)["x"]))


def irregular_rate_study(model: DelayModel, threshold: float, n_ladder, kappa_ref: int, M: int, seed: int,
                         threads: int | None = None, bias_check: str = "warn") -> WeakErrorReport:
    """Rate of the weak error for the payoff ``1{X_T > threshold}``."""
    f = TestFunction.indicator(threshold)
    return convergence_study(model, f, n_ladder, kappa_ref, M, seed, threads, bias_check=bias_check)

