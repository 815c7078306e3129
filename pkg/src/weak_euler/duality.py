"""Duality formulas for the error process.

Three checks live here.

* A linear case ``dY = aY dW + bbar Y dt + g dW`` with ``Phi = W_T``, where
  the dual process solves two scalar backward ODEs and both sides of the
  duality formula have closed forms.
* The chain ``E f(X_T) - E f(Xbar_T) = E[F Y_T] = mid = final`` for driftless
  diffusions.  ``mid`` integrates by parts once in the increment that drives
  each error step, ``final`` once more in the Brownian increments since the
  last coarse node.  Both are evaluated exactly for the discrete schemes by
  a backward sweep carrying the gradient and Hessian of
  ``Lambda_i = F * prod_{j >= i} (1 + sigma1_j dW_j)`` in the state
  ``(x, y, z)`` = (fine scheme, coarse scheme, coarse value at the cell start).
* A least-squares Monte Carlo estimate of the dual process of the delay
  error equation through its backward equation, with the duality residual
  measured on an independent path set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .error_equation import ForcingPath, LinearOperatorSpec, build_forcing, solve_triangular
from .euler import GL_NODES, GL_WEIGHTS, continuous_euler, euler_delay, frozen_coefficients
from .grids import coarsen, delay_offsets, make_grid, sample_path
from .models import DelayModel, SmoothFn1D, TestFunction
from .montecarlo import mean_and_stderr, run_blocks

ODE_TOL = dict(method="DOP853", rtol=1e-13, atol=1e-15)


# --- linear case with closed forms ----------------------------------------

@dataclass
class DualityCaseResult:
    lhs: float
    rhs: float
    stderr_lhs: float
    stderr_rhs: float
    closed_form: float | None = None
    closed_form_lhs: float | None = None
    closed_form_rhs: float | None = None
    discrete_lhs: float | None = None
    discrete_rhs: float | None = None
    stderr_diff: float = float("nan")


def analytic_duality_value(bbar: float, g: float, T: float) -> float:
    """``g (e^{bbar T} - 1) / bbar``, or ``g T`` when ``bbar = 0``."""
    if bbar == 0:
        return g * T
    return g * math.expm1(bbar * T) / bbar


def moment_ode_value(bbar: float, g: float, T: float) -> float:
    """``c(T)`` for ``c' = bbar c + g``, ``c(0) = 0``, solved numerically."""
    sol = solve_ivp(lambda t, c: bbar * c + g, (0.0, T), [0.0], **ODE_TOL)
    return float(sol.y[0, -1])


def dual_ode_value(a: float, bbar: float, g: float, T: float) -> float:
    """``g T + g int_0^T E[theta_t W_t] dt`` from the backward dual ODEs.

    ``p' = -bbar p``, ``r' = -a p - bbar r`` with ``p(T) = 1``, ``r(T) = 0``
    and ``theta_t = a p + bbar (p W_t + r)``; only ``bbar p(t) t`` survives
    the expectation.  The integral rides along as a third component.
    """
    def rhs(t, u):
        p, r, _ = u
        return [-bbar * p, -a * p - bbar * r, -bbar * p * t]

    sol = solve_ivp(rhs, (T, 0.0), [1.0, 0.0, 0.0], **ODE_TOL)
    return g * T + g * float(sol.y[2, -1])


def discrete_dual_coefficients(a: float, bbar: float, T: float, n: int):
    """Backward recursions ``p_k = p_{k+1}(1 + bbar h)``,
    ``r_k = r_{k+1}(1 + bbar h) + h a p_{k+1}`` on ``n`` steps."""
    h = T / n
    p = np.empty(n + 1)
    r = np.empty(n + 1)
    p[n], r[n] = 1.0, 0.0
    for k in range(n - 1, -1, -1):
        p[k] = p[k + 1] * (1 + bbar * h)
        r[k] = r[k + 1] * (1 + bbar * h) + h * a * p[k + 1]
    return p, r


def discrete_duality_values(a: float, bbar: float, g: float, T: float, n: int):
    """Exact expectations of both sides for the discrete scheme: ``(lhs, rhs)``."""
    h = T / n
    q = 1 + bbar * h
    lhs = g * n * h if bbar == 0 else g * (q ** n - 1) / bbar
    p, _ = discrete_dual_coefficients(a, bbar, T, n)
    k = np.arange(n)
    rhs = g * n * h + g * float(np.sum(h * bbar * p[1:] * k * h))
    return lhs, rhs


def closed_form_duality(a: float, bbar: float, g: float, T: float, n: int, M: int, seed: int,
                        threads: int | None = None) -> DualityCaseResult:
    """Both sides of the duality formula for the linear case.

    The Monte Carlo estimates target the discrete scheme, so they are
    compared with ``discrete_lhs``/``discrete_rhs``; ``closed_form`` is the
    continuous-time value of both sides.
    """
    if n < 8:
        raise ValueError("need at least 8 steps")
    grid = make_grid(T, n, T)
    p, r = discrete_dual_coefficients(a, bbar, T, n)
    alpha = LinearOperatorSpec("scalar_kernel", np.full(n, float(a)))
    beta = LinearOperatorSpec("scalar_kernel", np.full(n, float(bbar)))

    def task(start, count):
        path = sample_path(grid, 1, seed, count, start)
        W = path.W()
        G = ForcingPath(grid, g * W)
        Y = solve_triangular(alpha, beta, G, path)
        theta = a * p[1:, None] + bbar * (p[1:, None] * W[:-1] + r[1:, None])
        lhs = W[-1] * Y[-1]
        rhs = W[-1] * G.G[-1] + grid.h * np.sum(theta * G.G[:-1], axis=0)
        return {"lhs": lhs, "rhs": rhs}

    sims = run_blocks(task, M, threads)
    lhs, se_l = mean_and_stderr(sims["lhs"])
    rhs, se_r = mean_and_stderr(sims["rhs"])
    _, se_d = mean_and_stderr(sims["lhs"] - sims["rhs"])
    cl, cr = moment_ode_value(bbar, g, T), dual_ode_value(a, bbar, g, T)
    dl, dr = discrete_duality_values(a, bbar, g, T, n)
    return DualityCaseResult(lhs, rhs, se_l, se_r, analytic_duality_value(bbar, g, T), cl, cr, dl, dr, se_d)


# --- chain for driftless diffusions ---------------------------------------

def _moments(fn: SmoothFn1D, x, z):
    """Gauss-Legendre moments of ``fn'``, ``fn''``, ``fn'''`` along ``a x + (1-a) z``.

    Returns ``(I1, Ia2, Ib2, Iaa3, Iab3, Ibb3)`` = integrals over ``a`` of
    ``fn'``, ``a fn''``, ``(1-a) fn''``, ``a^2 fn'''``, ``a(1-a) fn'''``,
    ``(1-a)^2 fn'''``.
    """
    a = GL_NODES[:, None]
    w = GL_WEIGHTS[:, None]
    pts = a * x[None, :] + (1 - a) * z[None, :]
    d1, d2, d3 = fn.d1(pts), fn.d2(pts), fn.d3(pts)
    b = 1 - a
    return (np.sum(w * d1, 0), np.sum(w * a * d2, 0), np.sum(w * b * d2, 0),
            np.sum(w * a * a * d3, 0), np.sum(w * a * b * d3, 0), np.sum(w * b * b * d3, 0))


def _payoff_fn(f: TestFunction) -> SmoothFn1D:
    if f.kind != "smooth":
        raise ValueError("the chain needs a smooth payoff")
    zero = lambda x: np.zeros(np.shape(x))
    return SmoothFn1D(f.eval, f.d1, f.d2, f.d3 if f.d3 is not None else zero)


def ibp_chain_paths(sigma: SmoothFn1D, f: TestFunction, x0: float, increments: np.ndarray,
                         kappa: int, delta: float) -> dict:
    """Per-path terms of the chain on one batch of fine increments.

    ``increments`` has shape ``(N_f, P)``; the coarse scheme takes ``kappa``
    fine steps per step.  Returns arrays ``lhs`` (``F * (x_N - y_N)``),
    ``mid`` and ``final`` whose means agree exactly in expectation, plus
    ``direct`` = ``f(x_N) - f(y_N)``.
    """
    fp = _payoff_fn(f)
    w = increments
    N, P = w.shape
    if N % kappa:
        raise ValueError("fine steps must be a multiple of kappa")
    x = np.empty((N + 1, P))
    y = np.empty((N + 1, P))
    z = np.empty((N + 1, P))
    sd = np.zeros((N + 1, P))    # sum over l in the cell of d x_i / d dW_l
    dWc = np.zeros((N + 1, P))   # W_i - W at the cell start
    x[0] = y[0] = z[0] = x0
    for i in range(N):
        sx = sigma.eval(x[i])
        x[i + 1] = x[i] + sx * w[i]
        y[i + 1] = y[i] + sigma.eval(z[i]) * w[i]
        if (i + 1) % kappa == 0:
            z[i + 1] = y[i + 1]
        else:
            z[i + 1] = z[i]
            sd[i + 1] = (1 + sigma.d1(x[i]) * w[i]) * sd[i] + sx
            dWc[i + 1] = dWc[i] + w[i]

    # terminal functional and its derivatives in (x, y); z does not enter
    xN, yN = x[N], y[N]
    F, Fx, Fy, Fxx, Fxy, Fyy = _moments(fp, xN, yN)
    lam = F
    g = np.stack([Fx, Fy, np.zeros(P)])
    H = np.zeros((3, 3, P))
    H[0, 0], H[0, 1], H[1, 0], H[1, 1] = Fxx, Fxy, Fxy, Fyy

    mid = np.zeros(P)
    final = np.zeros(P)
    for i in range(N - 1, -1, -1):
        beta = 1.0 if (i + 1) % kappa == 0 else 0.0
        L = i % kappa
        xi, zi, wi = x[i], z[i], w[i]
        sx, sz = sigma.eval(xi), sigma.eval(zi)
        s1x, s1z = sigma.d1(xi), sigma.d1(zi)
        S1, Sx, Sz, Txx, Txz, Tzz = _moments(sigma, xi, zi)

        # terms using Lambda_{i+1}
        v = np.stack([sx, sz, beta * sz])
        V = np.einsum("kp,kp->p", g, v)
        U = S1 * sz * V
        mid += delta * U * dWc[i]
        ds = np.stack([(1 + s1x * wi) * sd[i], L * sz, beta * L * sz])
        dV = np.einsum("kp,klp,lp->p", v, H, ds) + g[0] * s1x * sd[i]
        final += delta * delta * sz * (Sx * sd[i] * V + S1 * dV)

        # step back: Lambda_i = m_i * Lambda_{i+1} o phi_i
        m = 1 + S1 * wi
        dm = np.stack([Sx * wi, np.zeros(P), Sz * wi])
        d2m = np.zeros((3, 3, P))
        d2m[0, 0], d2m[0, 2], d2m[2, 0], d2m[2, 2] = Txx * wi, Txz * wi, Txz * wi, Tzz * wi
        J = np.zeros((3, 3, P))
        J[0, 0] = 1 + s1x * wi
        J[1, 1] = 1.0
        J[1, 2] = s1z * wi
        J[2, 1] = beta
        J[2, 2] = beta * s1z * wi + (1 - beta)
        Jg = np.einsum("kip,kp->ip", J, g)
        curv = np.zeros((3, 3, P))
        curv[0, 0] = g[0] * sigma.d2(xi) * wi
        curv[2, 2] = (g[1] + beta * g[2]) * sigma.d2(zi) * wi
        JHJ = np.einsum("kip,klp,ljp->ijp", J, H, J)
        H = (lam * d2m + dm[:, None] * Jg[None, :] + Jg[:, None] * dm[None, :]
             + m * (JHJ + curv))
        g = lam * dm + m * Jg
        lam = m * lam

    lhs = F * (xN - yN)
    return {"lhs": lhs, "mid": mid, "final": final, "direct": f(xN) - f(yN)}


@dataclass
class ChainResult:
    lhs: float
    mid: float
    final: float
    direct: float
    stderr_lhs: float
    stderr_mid: float
    stderr_final: float
    stderr_lhs_mid: float
    stderr_lhs_final: float
    stderr_mid_final: float
    M: int

    def agree(self, k: float = 4.0) -> bool:
        """Pairwise agreement within ``k`` paired standard errors (exact when all vanish)."""
        pairs = ((self.lhs, self.mid, self.stderr_lhs_mid), (self.lhs, self.final, self.stderr_lhs_final),
                 (self.mid, self.final, self.stderr_mid_final))
        return all(abs(a - b) <= k * s for a, b, s in pairs)


def _driftless(model: DelayModel):
    if not model.is_diffusion:
        raise ValueError("the chain is for diffusions (nu = delta_0)")
    return model.sigma, model.x0


def ibp_chain(model: DelayModel, f: TestFunction, n: int, kappa: int, M: int, seed: int,
                   threads: int | None = None) -> ChainResult:
    """All three members of the chain from one simulation.

    The model's drift is ignored: the chain is stated for ``dX = sigma(X) dW``.
    """
    sigma, x0 = _driftless(model)
    grid = make_grid(model.r, n, model.horizon)

    def task(start, count):
        path = sample_path(grid, kappa, seed, count, start)
        return ibp_chain_paths(sigma, f, x0, path.increments, kappa, path.grid.h)

    s = run_blocks(task, M, threads)
    out = [mean_and_stderr(s[k]) for k in ("lhs", "mid", "final")]
    se_pairs = [mean_and_stderr(s[a] - s[b])[1] for a, b in (("lhs", "mid"), ("lhs", "final"), ("mid", "final"))]
    return ChainResult(out[0][0], out[1][0], out[2][0], float(np.mean(s["direct"])),
                          out[0][1], out[1][1], out[2][1], *se_pairs, M)


def chain_lhs(model: DelayModel, f: TestFunction, n: int, kappa: int, M: int, seed: int,
                 threads: int | None = None, reference: str = "auto"):
    """``E[F Y_T]`` with ``F = int f'(a X_T + (1-a) Xbar_T) da``; returns ``(estimate, stderr)``.

    The reference ``X_T`` is exact when the model has a closed form (and
    ``reference`` allows it), otherwise the fine scheme at ``kappa`` times
    the resolution.
    """
    sigma, x0 = _driftless(model)
    fp = _payoff_fn(f)
    grid = make_grid(model.r, n, model.horizon)
    exact = model.exact_terminal is not None and reference in ("auto", "exact")
    zero = SmoothFn1D.constant(0.0)
    plain = DelayModel(sigma, zero, model.nu, model.xi, model.r, model.horizon)

    def task(start, count):
        path = sample_path(grid, 1 if exact else kappa, seed, count, start)
        if exact:
            XT = model.exact_terminal(np.sum(path.increments, axis=0), model.horizon)
            XbT = euler_delay(plain, path).terminal
        else:
            XT = euler_delay(plain, path).terminal
            XbT = euler_delay(plain, coarsen(path, kappa)).terminal
        F = _moments(fp, XT, XbT)[0]
        return {"v": F * (XT - XbT)}

    return mean_and_stderr(run_blocks(task, M, threads)["v"])


def once_integrated_identity(model: DelayModel, f: TestFunction, n: int, kappa: int, M: int, seed: int,
                          threads: int | None = None) -> dict:
    r = ibp_chain(model, f, n, kappa, M, seed, threads)
    return {"lhs": r.lhs, "rhs": r.mid, "stderr_lhs": r.stderr_lhs, "stderr_rhs": r.stderr_mid,
            "stderr_diff": r.stderr_lhs_mid}


def twice_integrated_identity(model: DelayModel, f: TestFunction, n: int, kappa: int, M: int, seed: int,
                            threads: int | None = None) -> dict:
    """Twice-integrated form against the direct coupled difference ``E[f(X_T) - f(Xbar_T)]``."""
    r = ibp_chain(model, f, n, kappa, M, seed, threads)
    return {"lhs": r.direct, "rhs": r.final, "stderr_lhs": r.stderr_lhs, "stderr_rhs": r.stderr_final,
            "stderr_diff": r.stderr_lhs_final}


# --- least-squares dual estimate ------------------------------------------

@dataclass(frozen=True)
class LSMCConfig:
    """Regression setup: total-degree polynomials in the state features."""

    degree: int = 2
    M: int = 100_000
    ridge: float = 0.0
    max_condition: float = 1e12


@dataclass
class DualProblem:
    """Pathwise ingredients of a discrete error equation and its dual.

    ``features`` is ``(N, P, F)``; ``sigma1``/``b1`` are ``(N, P)``;
    ``lags`` are nonnegative step lags ``e_j`` with weights; ``G`` is
    ``(N+1, P)``.
    """

    features: np.ndarray
    increments: np.ndarray
    delta: float
    sigma1: np.ndarray
    b1: np.ndarray
    lags: tuple
    weights: tuple
    Phi: np.ndarray
    G: np.ndarray
    Y_terminal: np.ndarray


@dataclass
class DualFit:
    coef: list          # per step, regression coefficients of theta
    centers: list
    scales: list
    degree: int
    conditions: list = field(default_factory=list)
    ridges: list = field(default_factory=list)

    def theta(self, features: np.ndarray) -> np.ndarray:
        N = features.shape[0]
        return np.stack([_design(features[k], self.centers[k], self.scales[k], self.degree) @ self.coef[k]
                         for k in range(N)])


@dataclass
class LSMCResult:
    theta: np.ndarray
    lhs: float
    rhs: float
    residual: float
    stderr_lhs: float
    stderr_rhs: float
    stderr_diff: float
    fit: DualFit
    max_condition: float


def _exponents(n_features: int, degree: int):
    out = [()]
    for d in range(1, degree + 1):
        def rec(start, left, cur):
            if left == 0:
                out.append(tuple(cur))
                return
            for j in range(start, n_features):
                rec(j, left - 1, cur + [j])
        rec(0, d, [])
    return out


def _design(feat: np.ndarray, center, scale, degree: int) -> np.ndarray:
    u = (feat - center) / scale
    cols = []
    for e in _exponents(u.shape[1], degree):
        c = np.ones(u.shape[0])
        for j in e:
            c = c * u[:, j]
        cols.append(c)
    return np.column_stack(cols)


def _regress(A: np.ndarray, y: np.ndarray, ridge: float, max_cond: float):
    """Least squares with ridge escalation on ill-conditioned designs."""
    s = np.linalg.svd(A, compute_uv=False)
    nz = s[s > s[0] * 1e-14] if s[0] > 0 else s[:1]
    cond = float((nz[0] / nz[-1]) ** 2) if nz[-1] > 0 else math.inf
    lam = ridge
    if cond > max_cond and lam == 0.0:
        lam = 1e-10 * float(s[0] ** 2)
    if lam > 0:
        k = A.shape[1]
        A = np.vstack([A, math.sqrt(lam) * np.eye(k)])
        y = np.concatenate([y, np.zeros(k)])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    return coef, cond, lam


def fit_dual(problem: DualProblem, cfg: LSMCConfig) -> DualFit:
    """Backward regression for ``(Yhat, Zhat, theta)``.

    ``Zhat_k = E[Yhat_{k+1} dW_k | F_k] / delta``, ``Yminus_k = E[Yhat_{k+1} | F_k]``,
    ``theta_k = E[sum_j w_j (sigma1 Zhat + b1 Yminus)_{k+e_j} | F_k]`` over lags
    that stay before the horizon, and ``Yhat_k = Yminus_k + delta theta_k``.
    All conditional expectations are regressions on the features at step ``k``.
    """
    X = problem.features
    N, P, _ = X.shape
    centers = [X[k].mean(axis=0) for k in range(N)]
    scales = []
    for k in range(N):
        sd = X[k].std(axis=0)
        scales.append(np.where(sd > 0, sd, 1.0))
    designs = [_design(X[k], centers[k], scales[k], cfg.degree) for k in range(N)]
    Yhat = problem.Phi.copy()
    Z = np.zeros((N, P))
    Ym = np.zeros((N, P))
    coefs = [None] * N
    conds, ridges = [0.0] * N, [0.0] * N
    for k in range(N - 1, -1, -1):
        A = designs[k]
        cz, c1, _ = _regress(A, Yhat * problem.increments[k] / problem.delta, cfg.ridge, cfg.max_condition)
        cy, _, _ = _regress(A, Yhat, cfg.ridge, cfg.max_condition)
        Z[k] = A @ cz
        Ym[k] = A @ cy
        q = np.zeros(P)
        for e, w in zip(problem.lags, problem.weights):
            j = k + e
            if j <= N - 1:
                q += w * (problem.sigma1[j] * Z[j] + problem.b1[j] * Ym[j])
        ct, c2, lam = _regress(A, q, cfg.ridge, cfg.max_condition)
        coefs[k] = ct
        conds[k], ridges[k] = max(c1, c2), lam
        Yhat = Ym[k] + problem.delta * (A @ ct)
    return DualFit(coefs, centers, scales, cfg.degree, conds, ridges)


def duality_sides(problem: DualProblem, theta: np.ndarray):
    """Per-path ``Phi Y_N`` and ``Phi G_N + delta sum_k theta_k G_k``."""
    lhs = problem.Phi * problem.Y_terminal
    rhs = problem.Phi * problem.G[-1] + problem.delta * np.sum(theta * problem.G[:-1], axis=0)
    return lhs, rhs


def delay_dual_problem(model: DelayModel, grid, kappa: int, Phi, seed: int, n_paths: int,
                       first: int = 0) -> DualProblem:
    """Coupled fine/coarse simulation of a delay model packed for the dual regression.

    ``Phi`` maps the coarse terminal value ``Xbar_T`` to the terminal
    functional.  Features at fine step ``k`` are the continuous Euler value
    and its delay-weighted argument.
    """
    fine = sample_path(grid, kappa, seed, n_paths, first)
    coarse = coarsen(fine, kappa)
    X = euler_delay(model, fine)
    Xbar = euler_delay(model, coarse, grid)
    frozen = frozen_coefficients(model, X, Xbar, grid)
    G = build_forcing(model, Xbar, frozen, fine, grid)
    Xf = continuous_euler(model, Xbar, fine)
    fg = fine.grid
    offs = delay_offsets(model.nu.locations, fg)
    o = fg.offset
    cur = Xf.values[o: o + fg.N]
    lagged = sum(w * Xf.values[o + d: o + d + fg.N] for d, w in zip(offs, model.nu.weights))
    feats = np.stack([cur, lagged], axis=-1)
    Y_T = X.terminal - Xbar.terminal
    return DualProblem(feats, fine.increments, fg.h, frozen.sigma1, frozen.b1,
                       tuple(int(-d) for d in offs), tuple(model.nu.weights), Phi(Xbar.terminal),
                       G.G, Y_T)


def scalar_dual_problem(a: float, bbar: float, g: float, T: float, n: int, seed: int, n_paths: int,
                        first: int = 0) -> DualProblem:
    """Linear case ``alpha = a``, ``beta = bbar``, ``G = g W``, ``Phi = W_T``; feature is ``W``."""
    grid = make_grid(T, n, T)
    path = sample_path(grid, 1, seed, n_paths, first)
    W = path.W()
    G = ForcingPath(grid, g * W)
    Y = solve_triangular(LinearOperatorSpec("scalar_kernel", np.full(n, float(a))),
                         LinearOperatorSpec("scalar_kernel", np.full(n, float(bbar))), G, path)
    ones = np.ones((n, n_paths))
    return DualProblem(W[:-1, :, None], path.increments, grid.h, a * ones, bbar * ones, (0,), (1.0,),
                       W[-1], G.G, Y[-1])


def estimate_theta_lsmc(model: DelayModel, Phi, cfg: LSMCConfig, grid, seed: int, kappa: int = 4) -> LSMCResult:
    """Fit the dual process on ``cfg.M`` paths and test the duality formula on
    ``cfg.M`` further paths of the same stream.

    The residual is ``|E[Phi Y_N] - E[Phi G_N] - delta sum E[theta G]|``
    relative to ``|E[Phi Y_N]|``.
    """
    train = delay_dual_problem(model, grid, kappa, Phi, seed, cfg.M, 0)
    return _fit_and_test(train, delay_dual_problem(model, grid, kappa, Phi, seed, cfg.M, cfg.M), cfg)


def _fit_and_test(train: DualProblem, test: DualProblem, cfg: LSMCConfig) -> LSMCResult:
    if cfg.M < 10 * len(_exponents(train.features.shape[2], cfg.degree)):
        raise ValueError("need at least ten paths per basis function")
    fit = fit_dual(train, cfg)
    theta = fit.theta(test.features)
    lhs_p, rhs_p = duality_sides(test, theta)
    lhs, se_l = mean_and_stderr(lhs_p)
    rhs, se_r = mean_and_stderr(rhs_p)
    _, se_d = mean_and_stderr(lhs_p - rhs_p)
    resid = abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(lhs - rhs)
    return LSMCResult(theta, lhs, rhs, resid, se_l, se_r, se_d, fit, max(fit.conditions))
