"""Turning E[Phi Y_T] into a forcing integral with a dual process.

First a linear error equation where the dual process is explicit and every
term has a closed form.  Then the delay model, where the dual process is
estimated backward by least-squares regression and the duality formula is
checked on independent paths.  Last, the driftless chain that rewrites the
weak error with one and then two integrations by parts.
"""

import numpy as np

from weak_euler.duality import LSMCConfig, closed_form_duality, estimate_theta_lsmc, ibp_chain
from weak_euler.grids import make_grid
from weak_euler.models import make_model, make_payoff

for a, bbar in [(0.0, 0.0), (0.5, 1.0), (-0.5, -1.0)]:
    r = closed_form_duality(a, bbar, g=1.0, T=1.0, n=16, M=50_000, seed=0)
    print(f"a={a:+.1f} bbar={bbar:+.1f}: continuous {r.closed_form:.5f}  discrete {r.discrete_lhs:.5f}  "
          f"MC lhs {r.lhs:.4f}+-{r.stderr_lhs:.4f}  MC rhs {r.rhs:.4f}+-{r.stderr_rhs:.4f}")

model = make_model("delay")
res = estimate_theta_lsmc(model, np.cos, LSMCConfig(degree=2, M=50_000), make_grid(model.r, 4, model.horizon),
                          seed=1, kappa=4)
print(f"delay model, Phi = cos: E[Phi Y] = {res.lhs:.5e}, dual side = {res.rhs:.5e}, "
      f"relative residual {res.residual:.2%}")

chain = ibp_chain(make_model("bounded"), make_payoff("sin"), n=8, kappa=8, M=20_000, seed=2)
print(f"chain: E[F Y_T] {chain.lhs:.3e}+-{chain.stderr_lhs:.1e}, once integrated {chain.mid:.3e}"
      f"+-{chain.stderr_mid:.1e}, twice integrated {chain.final:.3e}+-{chain.stderr_final:.1e}")
