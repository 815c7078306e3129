"""How fast does the Euler scheme converge in law?

For dX = X dW with X_0 = 1 both second moments are known in closed form:
E X_T^2 = e^T and, for the scheme, E Xbar_N^2 = (1 + h)^N.  We compare the
paired Monte Carlo estimator against that exact error, then fit the rate on
a ladder of step sizes and look at error/h.
"""

import math

import numpy as np

from weak_euler.models import make_model, make_payoff
from weak_euler.weak_error import (analytic_report, convergence_study, estimate_weak_error,
                                   expansion_from_errors, gbm_second_moment_error)

model, f = make_model("gbm"), make_payoff("square")

# one step size, exact answer vs Monte Carlo
exact = gbm_second_moment_error(0.1)
est = estimate_weak_error(model, f, n=10, kappa_ref=1, M=100_000, seed=0)
print(f"n=10: exact error {exact:.5f}, MC {est.estimate:.5f} +- {est.stderr:.5f}")

# the analytic ladder gives a clean look at the rate
ladder = [4, 8, 16, 32, 64]
rep = analytic_report(ladder, 1.0, gbm_second_moment_error)
print(f"analytic slope over n={ladder}: {rep.slope:.4f}")

# the same fit on Monte Carlo errors, with paired coupling on one fine path
mc = convergence_study(model, f, [2, 4, 8, 16], kappa_ref=1, M=200_000, seed=1)
for p in mc.ladder:
    print(f"  n={p.n:3d}  error {p.error:+.4f} +- {p.stderr:.4f}   (exact {gbm_second_moment_error(p.h):.4f})")
print(f"MC slope {mc.slope:.3f}, 95% CI [{mc.slope_ci[0]:.3f}, {mc.slope_ci[1]:.3f}]")

# error/h settles at the first-order coefficient, here e/2
n = np.array([16, 32, 64, 128, 256])
exp_est = expansion_from_errors(1.0 / n, gbm_second_moment_error(1.0 / n))
for h, c, _ in exp_est.c_hat:
    print(f"  h=1/{round(1 / h):3d}  error/h = {c:.5f}")
print(f"extrapolated limit {exp_est.limit_estimate:.5f}  vs  e/2 = {math.e / 2:.5f}")
