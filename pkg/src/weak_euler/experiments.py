"""Named experiments driven by flat JSON configurations.

Each runner takes a resolved configuration and returns a summary dict, the
rows of ``results.csv`` and the rows of ``plotdata.csv``.  Contract
thresholds come from ``config["thresholds"]`` with the defaults below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import duality, error_equation, localization, weak_error
from .grids import make_grid, sample_path
from .models import MODEL_FACTORIES, TestFunction, make_model, make_payoff


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class Experiment:
    name: str
    runner: object
    required: tuple
    claim: str
    defaults: dict


def _model(spec):
    if isinstance(spec, str):
        return make_model(spec)
    if isinstance(spec, dict) and "name" in spec:
        return make_model(spec["name"], **spec.get("params", {}))
    raise ConfigError(f"bad model spec {spec!r}")


def _payoff(spec, model=None, cfg=None, threads=None) -> TestFunction:
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"bad test-function spec {spec!r}")
    name = spec["name"]
    if name == "indicator":
        K = spec.get("threshold", "median")
        if K == "median":
            K = localization.median_threshold(model, M=int(spec.get("median_paths", 100_000)),
                                              seed=int(cfg["seed"]) + 1, threads=threads)
        return TestFunction.indicator(float(K))
    return make_payoff(name, **spec.get("params", {}))


def _th(cfg, key):
    return cfg["thresholds"][key]


def _ladder_rows(report):
    return [{"n": p.n, "h": p.h, "error": p.error, "stderr": p.stderr, "M": p.M,
             "excluded": int(p.n in report.excluded_points)} for p in report.ladder]


def _plot_rows(report):
    return [{"h": p.h, "abs_error": abs(p.error), "stderr": p.stderr} for p in report.ladder]


def _in(x, band):
    return bool(math.isfinite(x) and band[0] <= x <= band[1])


# --- runners ----------------------------------------------------------------

def run_convergence(cfg, threads):
    model = _model(cfg["model"])
    f = _payoff(cfg["f"], model, cfg, threads)
    if cfg.get("mode") == "analytic":
        p = model.sigma.d1(np.array(0.0)) * 1.0
        rep = weak_error.analytic_report(cfg["n_ladder"], model.horizon,
                                         lambda h: weak_error.gbm_second_moment_error(
                                             h, model.horizon, float(p), model.x0))
    else:
        rep = weak_error.convergence_study(model, f, cfg["n_ladder"], cfg["kappa_ref"], cfg["M"],
                                           cfg["seed"], threads, bias_check="off" if cfg.get("no_bias_check") else "warn")
    passed = _in(rep.slope, _th(cfg, "slope_band"))
    return {"report": rep.as_dict(), "pass": passed}, _ladder_rows(rep), _plot_rows(rep)


def run_richardson(cfg, threads):
    model = _model(cfg["model"])
    f = _payoff(cfg["f"], model, cfg, threads)
    plain, extra = weak_error.richardson_study(model, f, cfg["n_ladder"], cfg["kappa_ref"], cfg["M"],
                                               cfg["seed"], threads)
    gain = extra.slope - plain.slope
    passed = bool(math.isfinite(gain) and gain >= _th(cfg, "min_gain"))
    rows = [{"n": p.n, "h": p.h, "plain": p.error, "plain_stderr": p.stderr, "extrapolated": q.error,
             "extrapolated_stderr": q.stderr, "M": p.M} for p, q in zip(plain.ladder, extra.ladder)]
    plot = [{"h": p.h, "abs_plain": abs(p.error), "abs_extrapolated": abs(q.error)}
            for p, q in zip(plain.ladder, extra.ladder)]
    return {"plain": plain.as_dict(), "extrapolated": extra.as_dict(), "gain": gain, "pass": passed}, rows, plot


def run_expansion(cfg, threads):
    model = _model(cfg["model"])
    if cfg.get("mode") == "analytic":
        h = np.array([model.horizon / n for n in cfg["n_ladder"]])
        s0 = float(model.sigma.d1(np.array(0.0)))
        est = weak_error.expansion_from_errors(h, weak_error.gbm_second_moment_error(h, model.horizon, s0, model.x0))
        target = float(cfg.get("target", math.e / 2))
        finest = est.c_hat[-1][1]
        passed = abs(finest - target) <= _th(cfg, "rel_tol") * abs(target)
        extra = {"target": target, "finest": finest}
    else:
        f = _payoff(cfg["f"], model, cfg, threads)
        est = weak_error.expansion_constant(model, f, cfg["n_ladder"], cfg["kappa_ref"], cfg["M"], cfg["seed"], threads)
        c = est.c_hat
        se = math.hypot(c[-1][2], c[-2][2])
        passed = est.decreasing and abs(c[-1][1] - c[-2][1]) <= _th(cfg, "stability_se") * se
        extra = {}
    rows = [{"h": h, "c_hat": c, "stderr": s} for h, c, s in est.c_hat]
    summary = {"c_hat": rows, "limit_estimate": est.limit_estimate, "differences": est.differences,
               "decreasing": est.decreasing, "pass": bool(passed), **extra}
    return summary, rows, [{"h": r["h"], "c_hat": r["c_hat"]} for r in rows]


def run_alignment(cfg, threads):
    aligned = _model(cfg["model"])
    mis = _model(cfg.get("misaligned_model", "misaligned"))
    f = _payoff(cfg["f"], aligned, cfg, threads)
    rep = weak_error.alignment_experiment(aligned, mis, f, cfg["n_ladder"], cfg["M"], cfg["seed"],
                                          cfg["kappa_ref"], threads)
    a = rep.aligned.c_hat
    se = math.hypot(a[-1][2], a[-2][2])
    stable = abs(a[-1][1] - a[-2][1]) <= _th(cfg, "stability_se") * se
    bounded = math.isfinite(rep.misaligned_bound) and rep.misaligned_bound <= _th(cfg, "max_ratio")
    rows = [{"h": x[0], "aligned": x[1], "aligned_stderr": x[2], "misaligned": y[1], "misaligned_stderr": y[2]}
            for x, y in zip(a, rep.misaligned.c_hat)]
    summary = {"rows": rows, "aligned_amplitude": rep.aligned_amplitude,
               "misaligned_amplitude": rep.misaligned_amplitude, "misaligned_bound": rep.misaligned_bound,
               "aligned_stable": bool(stable), "misaligned_bounded": bool(bounded), "pass": bool(stable and bounded)}
    return summary, rows, rows


def run_duality_closed(cfg, threads):
    rows = []
    ok = True
    by_b = {}
    for a in cfg.get("a_values", [0.0, 0.5, -0.5]):
        for b in cfg.get("bbar_values", [0.0, 1.0, -1.0]):
            r = duality.closed_form_duality(a, b, cfg.get("g", 1.0), cfg.get("T", 1.0), cfg.get("n", 16),
                                            cfg["M"], cfg["seed"], threads)
            agree = abs(r.closed_form_lhs - r.closed_form_rhs) < _th(cfg, "closed_tol") and \
                abs(r.closed_form_lhs - r.closed_form) < _th(cfg, "closed_tol")
            k = _th(cfg, "mc_se")
            mc = abs(r.lhs - r.discrete_lhs) <= k * r.stderr_lhs and abs(r.rhs - r.discrete_rhs) <= k * r.stderr_rhs
            by_b.setdefault(b, []).append(r.closed_form_rhs)
            ok &= agree and mc
            rows.append({"a": a, "bbar": b, "closed_form": r.closed_form, "ode_lhs": r.closed_form_lhs,
                         "ode_rhs": r.closed_form_rhs, "discrete": r.discrete_lhs, "mc_lhs": r.lhs,
                         "stderr_lhs": r.stderr_lhs, "mc_rhs": r.rhs, "stderr_rhs": r.stderr_rhs,
                         "closed_agree": bool(agree), "mc_agree": bool(mc)})
    spread = max(max(v) - min(v) for v in by_b.values())
    ok &= spread < _th(cfg, "closed_tol")
    return {"cases": rows, "a_invariance_spread": spread, "pass": bool(ok)}, rows, rows


def run_duality_lsmc(cfg, threads):
    model = _model(cfg["model"])
    n = cfg.get("n", 4)
    grid = make_grid(model.r, n, model.horizon)
    phi = {"cos": np.cos, "sin": np.sin}[cfg.get("phi", "cos")]
    lcfg = duality.LSMCConfig(cfg.get("degree", 2), cfg["M"], cfg.get("ridge", 0.0))
    r = duality.estimate_theta_lsmc(model, phi, lcfg, grid, cfg["seed"], cfg.get("kappa", 4))
    passed = r.residual < _th(cfg, "max_residual")
    row = {"lhs": r.lhs, "rhs": r.rhs, "residual": r.residual, "stderr_lhs": r.stderr_lhs,
           "stderr_rhs": r.stderr_rhs, "stderr_diff": r.stderr_diff, "max_condition": r.max_condition}
    theta = r.theta
    plot = [{"step": k, "theta_mean": float(theta[k].mean()), "theta_std": float(theta[k].std())}
            for k in range(theta.shape[0])]
    return {**row, "pass": bool(passed)}, [row], plot


def run_ibp_chain(cfg, threads):
    model = _model(cfg["model"])
    f = _payoff(cfg["f"], model, cfg, threads)
    r = duality.ibp_chain(model, f, cfg.get("n", 16), cfg.get("kappa", 32), cfg["M"], cfg["seed"], threads)
    passed = r.agree(_th(cfg, "mc_se"))
    row = dict(r.__dict__)
    return {**row, "pass": bool(passed)}, [row], [{"term": k, "value": row[k]} for k in ("lhs", "mid", "final")]


def run_psi_decay(cfg, threads):
    model = _model(cfg["model"])
    rep = localization.psi_decay_study(model, cfg["n_ladder"], cfg.get("kappa", cfg["kappa_ref"]), cfg["M"],
                                       cfg["seed"], threads)
    rows = [{**row, "mean_ratio": mr, "max_ratio": xr} for row, mr, xr in zip(rep.rows(), rep.mean_ratio, rep.max_ratio)]
    summary = {"rows": rows, "monotone": rep.monotone, "slope": rep.slope,
               "faster_than_resolvable": rep.faster_than_resolvable, "inclusion_ok": rep.inclusion_ok,
               "inclusion_worst": rep.inclusion_worst, "gamma_quantiles": rep.gamma_quantiles,
               "degenerate_paths": rep.degenerate_paths, "pass": bool(rep.passed)}
    return summary, rows, [{"h": r["h"], "fraction": r["fraction"], "mean_ratio": r["mean_ratio"]} for r in rows]


def run_irregular_rate(cfg, threads):
    model = _model(cfg["model"])
    spec = cfg.get("f", {"name": "indicator", "threshold": "median"})
    f = _payoff(spec, model, cfg, threads)
    rep = localization.irregular_rate_study(model, f.threshold, cfg["n_ladder"], cfg["kappa_ref"], cfg["M"],
                                            cfg["seed"], threads)
    passed = _in(rep.slope, _th(cfg, "slope_band"))
    return {"threshold": f.threshold, "report": rep.as_dict(), "pass": passed}, _ladder_rows(rep), _plot_rows(rep)


def run_error_identity(cfg, threads):
    names = sorted(MODEL_FACTORIES) if cfg["model"] == "all" else [cfg["model"]]
    rows = []
    ok = True
    for spec in names:
        model = _model(spec)
        grid = make_grid(model.r, cfg.get("n", 4), model.horizon)
        worst, iters, gap = 0.0, 0, 0.0
        done = 0
        while done < cfg["M"]:
            count = min(1024, cfg["M"] - done)
            fine = sample_path(grid, cfg["kappa_ref"], cfg["seed"], count, done)
            rep = error_equation.verify_error_identity(model, fine, grid)
            worst, iters, gap = max(worst, rep.max_residual), max(iters, rep.picard_iterations), max(gap, rep.solver_gap)
            done += count
        good = worst < _th(cfg, "max_residual") and iters <= fine.grid.N and gap < _th(cfg, "solver_gap")
        ok &= good
        rows.append({"model": model.name, "max_residual": worst, "picard_iterations": iters,
                     "steps": fine.grid.N, "solver_gap": gap, "pass": bool(good)})
    return {"models": rows, "pass": bool(ok)}, rows, rows


_BASE = {"M": 10_000, "kappa_ref": 16, "seed": 0}

EXPERIMENTS = {
    e.name: e for e in [
        Experiment("convergence", run_convergence, ("model", "f", "n_ladder"),
                   "weak error of order h (first-order expansion of the weak error)",
                   {"thresholds": {"slope_band": [0.8, 1.2]}}),
        Experiment("richardson", run_richardson, ("model", "f", "n_ladder"),
                   "extrapolation cancels the first-order term of the expansion",
                   {"thresholds": {"min_gain": 0.5}}),
        Experiment("expansion", run_expansion, ("model", "n_ladder"),
                   "error/h converges to the expansion constant",
                   {"thresholds": {"rel_tol": 0.02, "stability_se": 3.0}}),
        Experiment("alignment", run_alignment, ("model", "f", "n_ladder"),
                   "grid-aligned delays remove the oscillating term; misaligned ones keep it bounded by Ch",
                   {"thresholds": {"stability_se": 3.0, "max_ratio": 100.0}}),
        Experiment("duality-closed", run_duality_closed, (),
                   "duality formula for a linear error equation with explicit dual process",
                   {"M": 100_000, "thresholds": {"closed_tol": 1e-10, "mc_se": 4.0}}),
        Experiment("duality-lsmc", run_duality_lsmc, ("model",),
                   "duality formula through the backward equation of the dual process",
                   {"M": 100_000, "thresholds": {"max_residual": 0.05}}),
        Experiment("section2", run_ibp_chain, ("model", "f"),
                   "weak error = E[F Y_T] = once-integrated = twice-integrated form (diffusions)",
                   {"thresholds": {"mc_se": 4.0}}),
        Experiment("psi-decay", run_psi_decay, ("model", "n_ladder"),
                   "P(localization != 1) decays faster than any power of h (elliptic case)",
                   {"kappa_ref": 32, "thresholds": {}}),
        Experiment("irregular-rate", run_irregular_rate, ("model", "n_ladder"),
                   "order-h weak error for bounded measurable payoffs under ellipticity",
                   {"thresholds": {"slope_band": [0.7, 1.3]}}),
        Experiment("error-identity", run_error_identity, ("model",),
                   "X - Xbar solves the linear error equation driven by G",
                   {"M": 1000, "kappa_ref": 8, "thresholds": {"max_residual": 1e-9, "solver_gap": 1e-12}}),
    ]
}


def resolve_config(raw: dict, seed: int | None = None) -> dict:
    """Merge defaults, apply the seed override and validate."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; known: {sorted(EXPERIMENTS)}")
    exp = EXPERIMENTS[name]
    cfg = {**_BASE, **{k: v for k, v in exp.defaults.items() if k != "thresholds"}}
    cfg.update({k: v for k, v in raw.items() if k != "thresholds"})
    cfg["thresholds"] = {**exp.defaults.get("thresholds", {}), **raw.get("thresholds", {})}
    if seed is not None:
        cfg["seed"] = int(seed)
    missing = [k for k in exp.required if k not in cfg]
    if missing:
        raise ConfigError(f"experiment {name!r} needs fields {missing}")
    for key in ("M", "kappa_ref"):
        if not (isinstance(cfg[key], int) and cfg[key] > 0):
            raise ConfigError(f"{key} must be a positive integer")
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if "n_ladder" in cfg:
        lad = cfg["n_ladder"]
        if not (isinstance(lad, list) and lad and all(isinstance(n, int) and n > 0 for n in lad)):
            raise ConfigError("n_ladder must be a list of positive integers")
    if "model" in cfg and cfg["model"] != "all":
        try:
            _model(cfg["model"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def run_experiment(cfg: dict, threads: int | None = None):
    return EXPERIMENTS[cfg["experiment"]].runner(cfg, threads)


def list_text() -> str:
    lines = []
    for e in EXPERIMENTS.values():
        req = ", ".join(e.required) or "-"
        lines.append(f"{e.name:<16} requires: {req:<20} checks: {e.claim}")
    return "\n".join(lines)
