"""Weak-error laboratory: paired estimators, rate fits and extrapolation.

Every estimator simulates one fine Brownian path per sample and derives all
coarser schemes from it by summation, so the differences ``f(X) - f(Xbar)``
are computed on coupled paths.  The reference ``X`` is the model's exact
terminal solution when it has one, otherwise the Euler scheme on the finest
mesh.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .euler import euler_delay
from .grids import BrownianPath, coarsen, make_grid, sample_path
from .models import DelayModel, TestFunction
from .montecarlo import mean_and_stderr, run_blocks

NOISE_FACTOR = 3.0
PILOT_PATHS = 65536


class ReferenceBiasError(RuntimeError):
    """The fine reference is not fine enough for the requested precision."""


@dataclass
class LadderPoint:
    n: int
    h: float
    error: float
    stderr: float
    M: int
    var_reference: float = float("nan")
    var_difference: float = float("nan")


@dataclass
class BiasCheck:
    """Difference between the reference at ``kappa`` and at ``kappa/2`` on the same paths."""

    estimate: float
    stderr: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate) <= max(self.tolerance, 2.0 * self.stderr)


@dataclass
class WeakErrorReport:
    ladder: list
    slope: float
    slope_ci: tuple
    intercept: float
    excluded_points: list
    inconclusive: bool = False
    bias_check: BiasCheck | None = None
    label: str = ""

    def errors(self) -> np.ndarray:
        return np.array([p.error for p in self.ladder])

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "ladder": [p.__dict__ for p in self.ladder],
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "intercept": self.intercept,
            "excluded": list(self.excluded_points),
            "inconclusive": self.inconclusive,
            "bias_check": None if self.bias_check is None else {
                **self.bias_check.__dict__, "passed": self.bias_check.passed},
        }


@dataclass
class ExpansionEstimate:
    c_hat: list
    limit_estimate: float
    differences: list = field(default_factory=list)
    decreasing: bool = True


@dataclass
class WeakErrorEstimate:
    estimate: float
    stderr: float
    M: int
    bias_check: BiasCheck | None = None


# --- simulation core ------------------------------------------------------

def _coarse_terminal(model: DelayModel, fine: BrownianPath, factor: int) -> np.ndarray:
    return euler_delay(model, coarsen(fine, factor)).terminal


def _reference_terminal(model: DelayModel, fine: BrownianPath, use_exact: bool) -> np.ndarray:
    if use_exact:
        WT = np.sum(fine.increments, axis=0)
        return model.exact_terminal(WT, fine.grid.T)
    return euler_delay(model, fine).terminal


def _use_exact(model: DelayModel, reference: str) -> bool:
    if reference == "exact" and model.exact_terminal is None:
        raise ValueError(f"model {model.name!r} has no exact solution")
    return reference == "exact" or (reference == "auto" and model.exact_terminal is not None)


def _check_ladder(n_ladder) -> list:
    ladder = sorted(int(n) for n in n_ladder)
    if ladder[0] < 1 or any(ladder[-1] % n for n in ladder):
        raise ValueError("every ladder entry must divide the largest one")
    return ladder


def simulate_ladder(model: DelayModel, f: TestFunction, n_ladder, kappa_ref: int, M: int, seed: int,
                    threads: int | None = None, reference: str = "auto", half_reference: bool = False,
                    first: int = 0) -> dict:
    """Per-path payoffs on one shared fine path.

    Returns ``{"ref": f(X), "n<k>": f(Xbar^k) ...}`` and, with
    ``half_reference``, ``"half"`` = payoff of the Euler reference at half the
    fine resolution.
    """
    ladder = _check_ladder(n_ladder)
    base = make_grid(model.r, ladder[0], model.horizon)
    exact = _use_exact(model, reference)
    # an exact reference only needs the finest scheme's mesh
    total = (ladder[-1] // ladder[0]) * (1 if exact else int(kappa_ref))

    def task(start, count):
        fine = sample_path(base, total, seed, count, start)
        out = {"ref": f(_reference_terminal(model, fine, exact))}
        if half_reference:
            out["half"] = f(_coarse_terminal(model, fine, 2))
        for n in ladder:
            out[f"n{n}"] = f(_coarse_terminal(model, fine, total * ladder[0] // n))
        return out

    return run_blocks(task, M, threads, first)


def _bias_check(model, f, n_max, kappa_ref, M, seed, threads, stderr) -> BiasCheck:
    pilot = min(M, PILOT_PATHS)
    grid = make_grid(model.r, n_max, model.horizon)

    def task(start, count):
        fine = sample_path(grid, kappa_ref, seed, count, start)
        return {"d": f(euler_delay(model, fine).terminal) - f(_coarse_terminal(model, fine, 2))}

    d = run_blocks(task, pilot, threads)["d"]
    est, se = mean_and_stderr(d)
    return BiasCheck(est, se, 0.5 * stderr)


def _apply_bias_policy(check: BiasCheck, policy: str):
    if check.passed:
        return
    msg = (f"reference bias {check.estimate:.3g} exceeds half the standard error "
           f"({check.tolerance:.3g}); increase kappa_ref")
    if policy == "raise":
        raise ReferenceBiasError(msg)
    if policy == "warn":
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def estimate_weak_error(model: DelayModel, f: TestFunction, n: int, kappa_ref: int, M: int, seed: int,
                        threads: int | None = None, reference: str = "auto",
                        bias_check: str = "warn") -> WeakErrorEstimate:
    """Paired estimate of ``E f(X_T) - E f(Xbar_T)`` at ``n`` steps per delay length."""
    sims = simulate_ladder(model, f, [n], kappa_ref, M, seed, threads, reference)
    est, se = mean_and_stderr(sims["ref"] - sims[f"n{n}"])
    check = None
    if bias_check != "off" and not _use_exact(model, reference):
        check = _bias_check(model, f, n, kappa_ref, M, seed, threads, se)
        _apply_bias_policy(check, bias_check)
    return WeakErrorEstimate(est, se, M, check)


# --- rate fits ------------------------------------------------------------

def fit_rate(h, error, stderr=None, noise_factor: float = NOISE_FACTOR, level: float = 0.95):
    """Fit ``log|error| = intercept + slope * log h``.

    With standard errors the fit is weighted by ``(error/stderr)^2``, the
    inverse delta-method variance of ``log|error|``, and points with
    ``|error| < noise_factor * stderr`` are dropped.  Without them (exact
    errors) it is ordinary least squares.  Returns
    ``(slope, (lo, hi), intercept, excluded_indices)``; the slope is ``nan``
    when fewer than three points survive.
    """
    h = np.asarray(h, dtype=float)
    e = np.abs(np.asarray(error, dtype=float))
    if stderr is None:
        keep = e > 0
        w = np.ones_like(e)
    else:
        se = np.asarray(stderr, dtype=float)
        keep = (e > 0) & (e >= noise_factor * se)
        with np.errstate(divide="ignore"):
            w = np.where(se > 0, (e / np.where(se > 0, se, 1.0)) ** 2, 1e300)
    excluded = [int(i) for i in np.flatnonzero(~keep)]
    if keep.sum() < 3:
        return float("nan"), (float("nan"), float("nan")), float("nan"), excluded
    x, y, w = np.log(h[keep]), np.log(e[keep]), w[keep]
    A = np.column_stack([np.ones_like(x), x])
    AtW = A.T * w
    cov = np.linalg.inv(AtW @ A)
    coef = cov @ (AtW @ y)
    resid = y - A @ coef
    dof = len(x) - 2
    if stderr is None:
        scale = float(resid @ resid) / dof if dof > 0 else 0.0
        q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else float("nan")
    else:
        # known variances; inflate only when the points scatter more than their errors
        chi2 = float(resid @ (w * resid))
        scale = max(1.0, chi2 / dof) if dof > 0 else 1.0
        q = stats.norm.ppf(0.5 + level / 2)
    half = q * math.sqrt(cov[1, 1] * scale)
    slope = float(coef[1])
    return slope, (slope - half, slope + half), float(coef[0]), excluded


def _report(ladder_pts, label="", bias=None, analytic=False) -> WeakErrorReport:
    ladder_pts = sorted(ladder_pts, key=lambda p: -p.h)
    h = [p.h for p in ladder_pts]
    e = [p.error for p in ladder_pts]
    se = None if analytic else [p.stderr for p in ladder_pts]
    slope, ci, icpt, excl = fit_rate(h, e, se)
    return WeakErrorReport(ladder_pts, slope, ci, icpt, [ladder_pts[i].n for i in excl],
                           inconclusive=not math.isfinite(slope), bias_check=bias, label=label)


def analytic_report(n_ladder, T: float, error_fn, label: str = "analytic") -> WeakErrorReport:
    """Run the rate fit on exact errors ``error_fn(h)`` (no Monte Carlo)."""
    pts = [LadderPoint(int(n), T / n, float(error_fn(T / n)), 0.0, 0) for n in n_ladder]
    return _report(pts, label, analytic=True)


def gbm_second_moment_error(h, T: float = 1.0, sigma0: float = 1.0, x0: float = 1.0):
    """``E X_T^2 - E Xbar_T^2`` for ``dX = sigma0 X dW``: ``x0^2 (e^{s^2 T} - (1 + s^2 h)^{T/h})``."""
    h = np.asarray(h, dtype=float)
    s2 = sigma0 * sigma0
    return x0 * x0 * (np.exp(s2 * T) - (1 + s2 * h) ** np.rint(T / h))


def convergence_study(model: DelayModel, f: TestFunction, n_ladder, kappa_ref: int, M: int, seed: int,
                      threads: int | None = None, reference: str = "auto",
                      bias_check: str = "warn") -> WeakErrorReport:
    """Paired weak errors over a ladder sharing one reference at ``max(n) * kappa_ref``."""
    ladder = _check_ladder(n_ladder)
    sims = simulate_ladder(model, f, ladder, kappa_ref, M, seed, threads, reference)
    var_ref = float(np.var(sims["ref"], ddof=1))
    pts = []
    for n in ladder:
        d = sims["ref"] - sims[f"n{n}"]
        est, se = mean_and_stderr(d)
        pts.append(LadderPoint(n, model.r / n, est, se, M, var_ref, float(np.var(d, ddof=1))))
    check = None
    if bias_check != "off" and not _use_exact(model, reference):
        check = _bias_check(model, f, ladder[-1], kappa_ref, M, seed, threads, min(p.stderr for p in pts))
        _apply_bias_policy(check, bias_check)
    return _report(pts, f"{model.name}/{f.name}", check)


def richardson(model: DelayModel, f: TestFunction, n: int, kappa_ref: int, M: int, seed: int,
               threads: int | None = None, reference: str = "auto"):
    """``E f(X) - [2 E f(Xbar^{2n}) - E f(Xbar^n)]`` on shared paths; returns ``(estimate, stderr)``."""
    sims = simulate_ladder(model, f, [n, 2 * n], kappa_ref, M, seed, threads, reference)
    return mean_and_stderr(sims["ref"] - 2 * sims[f"n{2 * n}"] + sims[f"n{n}"])


def richardson_study(model: DelayModel, f: TestFunction, n_ladder, kappa_ref: int, M: int, seed: int,
                     threads: int | None = None, reference: str = "auto"):
    """Plain and extrapolated ladders from one simulation.

    Extrapolated errors are measured against an extrapolated reference
    (``2 f(X^ref) - f(X^{ref/2})``) unless the model is exact, so that the
    reference's own first-order bias does not put a floor under them.
    Returns ``(plain_report, extrapolated_report)``.
    """
    ladder = _check_ladder(n_ladder)
    full = sorted(set(ladder) | {2 * n for n in ladder})
    exact = _use_exact(model, reference)
    sims = simulate_ladder(model, f, full, kappa_ref, M, seed, threads, reference, half_reference=not exact)
    ref_x = sims["ref"] if exact else 2 * sims["ref"] - sims["half"]
    plain, extra = [], []
    for n in ladder:
        est, se = mean_and_stderr(sims["ref"] - sims[f"n{n}"])
        plain.append(LadderPoint(n, model.r / n, est, se, M))
        est, se = mean_and_stderr(ref_x - 2 * sims[f"n{2 * n}"] + sims[f"n{n}"])
        extra.append(LadderPoint(n, model.r / n, est, se, M))
    return _report(plain, "plain"), _report(extra, "extrapolated")


# --- expansion constant ---------------------------------------------------

def expansion_from_errors(h, error, stderr=None) -> ExpansionEstimate:
    """``C(h) = error/h`` and its Richardson limit ``2 C(h_min) - C(2 h_min)``."""
    order = np.argsort(-np.asarray(h, dtype=float))
    h = np.asarray(h, dtype=float)[order]
    c = np.asarray(error, dtype=float)[order] / h
    se = np.zeros_like(c) if stderr is None else np.asarray(stderr, dtype=float)[order] / h
    c_hat = [(float(a), float(b), float(s)) for a, b, s in zip(h, c, se)]
    if len(c) >= 2 and math.isclose(h[-2], 2 * h[-1], rel_tol=1e-9):
        limit = float(2 * c[-1] - c[-2])
    else:
        limit = float(c[-1])
    diffs = [float(abs(c[i + 1] - c[i])) for i in range(len(c) - 1)]
    slack = [2 * math.hypot(se[i], se[i + 1]) for i in range(len(c) - 1)]
    decreasing = all(diffs[i + 1] <= diffs[i] + slack[i + 1] for i in range(len(diffs) - 1))
    return ExpansionEstimate(c_hat, limit, diffs, decreasing)


def expansion_constant(model: DelayModel, f: TestFunction, n_ladder, kappa_ref: int, M: int, seed: int,
                       threads: int | None = None, reference: str = "auto") -> ExpansionEstimate:
    rep = convergence_study(model, f, n_ladder, kappa_ref, M, seed, threads, reference, bias_check="off")
    return expansion_from_errors([p.h for p in rep.ladder], [p.error for p in rep.ladder],
                                 [p.stderr for p in rep.ladder])


@dataclass
class AlignmentReport:
    aligned: ExpansionEstimate
    misaligned: ExpansionEstimate
    aligned_amplitude: float
    misaligned_amplitude: float
    misaligned_bound: float


def _amplitude(est: ExpansionEstimate, tail: int = 3) -> float:
    vals = [c for _, c, _ in est.c_hat[-tail:]]
    return float(max(vals) - min(vals))


def alignment_experiment(model_aligned: DelayModel, model_misaligned: DelayModel, f: TestFunction,
                         n_ladder, M: int, seed: int, kappa_ref: int = 16,
                         threads: int | None = None) -> AlignmentReport:
    """``error/h`` for a grid-aligned and a misaligned delay atom, side by side.

    The amplitude is the spread of ``error/h`` over the three finest points;
    ``misaligned_bound`` is ``max |error/h|`` over the whole ladder.
    """
    a = expansion_constant(model_aligned, f, n_ladder, kappa_ref, M, seed, threads)
    b = expansion_constant(model_misaligned, f, n_ladder, kappa_ref, M, seed, threads)
    bound = max(abs(c) for _, c, _ in b.c_hat)
    return AlignmentReport(a, b, _amplitude(a), _amplitude(b), bound)


# --- output ---------------------------------------------------------------

def write_ladder_csv(report: WeakErrorReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "h", "error", "stderr", "M", "excluded"])
        for p in report.ladder:
            w.writerow([p.n, repr(p.h), repr(p.error), repr(p.stderr), p.M, int(p.n in report.excluded_points)])


def write_plotdata(report: WeakErrorReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "abs_error", "stderr"])
        for p in report.ladder:
            w.writerow([repr(p.h), repr(abs(p.error)), repr(p.stderr)])
