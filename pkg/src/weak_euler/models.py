"""Coefficient functions, delay measures, initial segments and payoffs.

Coefficients carry their first three derivatives explicitly; :func:`validate`
compares them with central finite differences so that a typo in a hand-coded
derivative is caught before it corrupts a variation tableau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Fn = Callable[[np.ndarray], np.ndarray]

FD_STEP = 1e-5
FD_RTOL = 1e-6
PROBE = np.linspace(-3.0, 3.0, 25)


def _const(c: float) -> Fn:
    return lambda x: np.full(np.shape(x), float(c))


@dataclass(frozen=True)
class SmoothFn1D:
    """A scalar C^3 function with its derivatives (all numpy-vectorised)."""

    eval: Fn
    d1: Fn
    d2: Fn
    d3: Fn
    bounded_derivs: bool = True
    ellipticity_floor: float = 0.0
    name: str = ""
    is_constant: bool = False

    def __call__(self, x):
        return self.eval(x)

    @classmethod
    def constant(cls, c: float) -> "SmoothFn1D":
        z = _const(0.0)
        floor = float(c) if c > 0 else 0.0
        return cls(_const(c), z, z, z, True, floor, f"{c:g}", True)

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "SmoothFn1D":
        z = _const(0.0)
        return cls(lambda x: slope * np.asarray(x, dtype=float) + intercept, _const(slope), z, z,
                   bounded_derivs=False, name=f"{slope:g}*x+{intercept:g}")


@dataclass(frozen=True)
class DelayMeasure:
    """Finite atomic measure ``sum_j w_j delta_{u_j}`` on ``[-r, 0]``."""

    locations: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(float(u) for u in self.locations))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.locations) != len(self.weights):
            raise ValueError("locations and weights differ in length")

    @property
    def atoms(self):
        return list(zip(self.locations, self.weights))

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights))

    @classmethod
    def dirac(cls, u: float = 0.0) -> "DelayMeasure":
        return cls((u,), (1.0,))


@dataclass(frozen=True)
class InitialSegment:
    """Deterministic initial path ``xi`` on ``[-r, 0]`` and its derivative."""

    xi: Fn
    xi_prime: Fn

    @classmethod
    def constant(cls, x0: float) -> "InitialSegment":
        return cls(_const(x0), _const(0.0))

    def __call__(self, s):
        return self.xi(s)


@dataclass(frozen=True)
class DelayModel:
    """``dX = sigma(int X_{t+u} nu(du)) dW + b(...) dt`` with ``X = xi`` on ``[-r, 0]``.

    ``horizon`` is the default terminal time used by experiments.
    ``exact_terminal``, when present, maps ``(W_T, T)`` to the exact solution
    ``X_T`` on the same Brownian path.
    """

    sigma: SmoothFn1D
    b: SmoothFn1D
    nu: DelayMeasure
    xi: InitialSegment
    r: float
    horizon: float = 1.0
    name: str = ""
    exact_terminal: Optional[Callable[[np.ndarray, float], np.ndarray]] = field(default=None, compare=False)

    @property
    def x0(self) -> float:
        return float(self.xi(np.array(0.0)))

    @property
    def is_diffusion(self) -> bool:
        return self.nu.locations == (0.0,) and self.nu.weights == (1.0,)

    def with_drift(self, b: SmoothFn1D) -> "DelayModel":
        return DelayModel(self.sigma, b, self.nu, self.xi, self.r, self.horizon, self.name, None)


@dataclass(frozen=True)
class TestFunction:
    """Payoff ``f``: ``smooth`` (with derivatives), ``indicator`` of ``x > threshold``, or ``bounded``."""

    __test__ = False  # not a pytest class

    kind: str
    eval: Fn
    d1: Optional[Fn] = None
    d2: Optional[Fn] = None
    d3: Optional[Fn] = None
    threshold: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return self.eval(x)

    @classmethod
    def smooth(cls, fn: SmoothFn1D, name: str = "") -> "TestFunction":
        return cls("smooth", fn.eval, fn.d1, fn.d2, fn.d3, None, name or fn.name)

    @classmethod
    def indicator(cls, threshold: float) -> "TestFunction":
        K = float(threshold)
        return cls("indicator", lambda x: (np.asarray(x) > K).astype(float), threshold=K,
                   name=f"1{{x>{K:g}}}")


# --- standard functions -----------------------------------------------------

def sine(amplitude: float = 1.0, shift: float = 0.0) -> SmoothFn1D:
    a, c = amplitude, shift
    return SmoothFn1D(lambda x: c + a * np.sin(x), lambda x: a * np.cos(x),
                      lambda x: -a * np.sin(x), lambda x: -a * np.cos(x),
                      True, max(c - abs(a), 0.0), f"{c:g}+{a:g}sin")


def cosine(amplitude: float = 1.0, shift: float = 0.0) -> SmoothFn1D:
    a, c = amplitude, shift
    return SmoothFn1D(lambda x: c + a * np.cos(x), lambda x: -a * np.sin(x),
                      lambda x: -a * np.cos(x), lambda x: a * np.sin(x),
                      True, max(c - abs(a), 0.0), f"{c:g}+{a:g}cos")


def tanh_vol(base: float = 0.5, amplitude: float = 0.25) -> SmoothFn1D:
    def d1(x):
        s = 1.0 / np.cosh(x) ** 2
        return amplitude * s

    def d2(x):
        t = np.tanh(x)
        return -2.0 * amplitude * t / np.cosh(x) ** 2

    def d3(x):
        t = np.tanh(x)
        s2 = 1.0 / np.cosh(x) ** 2
        return amplitude * (-2.0 * s2 * s2 + 4.0 * t * t * s2)

    return SmoothFn1D(lambda x: base + amplitude * np.tanh(x), d1, d2, d3,
                      True, base - abs(amplitude), f"{base:g}+{amplitude:g}tanh")


def rational_drift(scale: float = 0.1) -> SmoothFn1D:
    """``scale * x / (1 + x^2)``."""
    c = scale

    def f(x):
        x = np.asarray(x, dtype=float)
        return c * x / (1 + x * x)

    def d1(x):
        x = np.asarray(x, dtype=float)
        return c * (1 - x * x) / (1 + x * x) ** 2

    def d2(x):
        x = np.asarray(x, dtype=float)
        return c * (2 * x ** 3 - 6 * x) / (1 + x * x) ** 3

    def d3(x):
        x = np.asarray(x, dtype=float)
        return c * (-6 * x ** 4 + 36 * x * x - 6) / (1 + x * x) ** 4

    return SmoothFn1D(f, d1, d2, d3, True, 0.0, f"{c:g}x/(1+x^2)")


def square() -> SmoothFn1D:
    return SmoothFn1D(lambda x: np.asarray(x, dtype=float) ** 2, lambda x: 2.0 * np.asarray(x, dtype=float),
                      _const(2.0), _const(0.0), False, 0.0, "x^2")


def identity() -> SmoothFn1D:
    return SmoothFn1D.linear(1.0)


# --- catalog ----------------------------------------------------------------

def gbm(sigma0: float = 1.0, x0: float = 1.0, T: float = 1.0) -> DelayModel:
    """(a) ``dX = sigma0 X dW``; unbounded coefficient kept for its exact moments."""
    s0 = float(sigma0)

    def exact(WT, T_):
        return x0 * np.exp(s0 * WT - 0.5 * s0 * s0 * T_)

    return DelayModel(SmoothFn1D.linear(s0), SmoothFn1D.constant(0.0), DelayMeasure.dirac(0.0),
                      InitialSegment.constant(x0), float(T), float(T), "gbm", exact)


def bounded(x0: float = 0.0, T: float = 1.0) -> DelayModel:
    """(b) elliptic diffusion ``sigma = 0.4 + 0.1 sin``, ``b = 0.1 cos``."""
    return DelayModel(sine(0.1, 0.4), cosine(0.1), DelayMeasure.dirac(0.0),
                      InitialSegment.constant(x0), float(T), float(T), "bounded")


def _delay_coeffs():
    return tanh_vol(0.5, 0.25), rational_drift(0.1)


def _linear_segment(level: float = 1.0, slope: float = 0.1) -> InitialSegment:
    return InitialSegment(lambda s: level + slope * np.asarray(s, dtype=float), _const(slope))


def delay(r: float = 1.0, T: float = 2.0) -> DelayModel:
    """(c) ``nu = delta_{-r}`` with ``xi(s) = 1 + 0.1 s``."""
    s, b = _delay_coeffs()
    return DelayModel(s, b, DelayMeasure.dirac(-r), _linear_segment(), float(r), float(T), "delay")


def two_atom(r: float = 1.0, T: float = 2.0) -> DelayModel:
    """(d) ``nu = (delta_0 + delta_{-r}) / 2``."""
    s, b = _delay_coeffs()
    return DelayModel(s, b, DelayMeasure((0.0, -r), (0.5, 0.5)), _linear_segment(), float(r), float(T),
                      "two_atom")


def misaligned(r: float = 1.0, T: float = 2.0, fraction: float = 1 / math.sqrt(2)) -> DelayModel:
    """(e) ``nu = delta_{u0}`` with ``u0 = -fraction * r`` off every dyadic grid."""
    s, b = _delay_coeffs()
    return DelayModel(s, b, DelayMeasure.dirac(-fraction * r), _linear_segment(), float(r), float(T),
                      "misaligned")


def constant_vol(c: float = 0.3, x0: float = 0.0, T: float = 1.0) -> DelayModel:
    """``dX = c dW``: every Euler scheme is exact."""
    return DelayModel(SmoothFn1D.constant(c), SmoothFn1D.constant(0.0), DelayMeasure.dirac(0.0),
                      InitialSegment.constant(x0), float(T), float(T), "constant",
                      lambda WT, T_: x0 + c * WT)


MODEL_FACTORIES = {
    "gbm": gbm,
    "bounded": bounded,
    "delay": delay,
    "two_atom": two_atom,
    "misaligned": misaligned,
    "constant": constant_vol,
}

PAYOFF_FACTORIES = {
    "sin": lambda: TestFunction.smooth(sine(), "sin"),
    "cos": lambda: TestFunction.smooth(cosine(), "cos"),
    "square": lambda: TestFunction.smooth(square(), "square"),
    "identity": lambda: TestFunction.smooth(identity(), "identity"),
    "indicator": TestFunction.indicator,
}


def make_model(name: str, **params) -> DelayModel:
    try:
        factory = MODEL_FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODEL_FACTORIES)}") from None
    return factory(**params)


def make_payoff(name: str, **params) -> TestFunction:
    try:
        factory = PAYOFF_FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; known: {sorted(PAYOFF_FACTORIES)}") from None
    return factory(**params)


def builtin_catalog() -> dict:
    """Default instances of every catalog model and smooth test function."""
    out = {name: f() for name, f in MODEL_FACTORIES.items()}
    out.update({f"f_{name}": f() for name, f in PAYOFF_FACTORIES.items() if name != "indicator"})
    out["f_indicator"] = TestFunction.indicator(0.0)
    return out


# --- validation -------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join(f"[{'ok' if c.passed else 'FAIL'}] {c.name} {c.detail}" for c in self.checks)


def derivative_mismatch(f: Fn, df: Fn, probe=PROBE, step: float = FD_STEP) -> float:
    """Max of ``|central difference - df| / max(1, |df|)`` over ``probe``."""
    x = np.asarray(probe, dtype=float)
    fd = (f(x + step) - f(x - step)) / (2 * step)
    exact = df(x)
    return float(np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))))


def check_smooth(fn: SmoothFn1D, label: str, probe=PROBE) -> list:
    checks = []
    for lo, hi, tag in ((fn.eval, fn.d1, "d1"), (fn.d1, fn.d2, "d2"), (fn.d2, fn.d3, "d3")):
        dev = derivative_mismatch(lo, hi, probe)
        checks.append(Check(f"{label}.{tag}", dev < FD_RTOL, f"max deviation {dev:.2e}"))
    if fn.ellipticity_floor > 0:
        lowest = float(np.min(fn.eval(np.linspace(-50, 50, 20001))))
        checks.append(Check(f"{label}.ellipticity", lowest >= fn.ellipticity_floor - 1e-12,
                            f"min {lowest:.4g} vs floor {fn.ellipticity_floor:.4g}"))
    return checks


def validate(model: DelayModel) -> ValidationReport:
    """Run every invariant of the model; never raises."""
    checks = []
    try:
        checks += check_smooth(model.sigma, "sigma")
        checks += check_smooth(model.b, "b")
        locs = np.asarray(model.nu.locations)
        w = np.asarray(model.nu.weights)
        checks.append(Check("nu.nonempty", len(locs) > 0))
        checks.append(Check("nu.locations", bool(np.all((locs <= 0) & (locs >= -model.r * (1 + 1e-12)))),
                            f"locations {locs.tolist()} vs [-{model.r}, 0]"))
        checks.append(Check("nu.weights", bool(np.all(w >= 0)), f"weights {w.tolist()}"))
        seg = np.linspace(-model.r + FD_STEP, -FD_STEP, 11)
        dev = derivative_mismatch(model.xi.xi, model.xi.xi_prime, seg)
        checks.append(Check("xi.xi_prime", dev < FD_RTOL, f"max deviation {dev:.2e}"))
    except Exception as exc:  # report, do not raise
        checks.append(Check("evaluation", False, repr(exc)))
    return ValidationReport(checks)
