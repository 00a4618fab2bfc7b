"""
Escaping a strict saddle
========================

Start next to the saddle of ``Phi(x) = (x1^2 - 0.5 x2^2) / 2`` with exact
gradients. The small gradient opens an escape episode; the random kick grows
along the negative-curvature direction and the movement test ends the episode.
At the minimum of a bowl the same test instead certifies the anchor.
"""

import numpy as np

from dprgda import AlgoParams, RandomSource, problems, run, sosp_check
from dprgda.escape import escape_schedule, exact_diagnostics

# Radius, episode length and movement threshold from the escape scalings.
sched = escape_schedule(eta_H=0.2, alpha=0.01, rho_phi=1.0, L_phi=1.0, dim=2, delta2=1e-3, R=0.5)
print({k: round(v, 6) for k, v in sched.items()})
params = AlgoParams(eta=0.01, eta_H=0.2, r=sched["r"], t_thres=sched["t_thres"], D_bar=sched["D_bar"],
                    alpha=0.01, T=200, K=1, q=1, S1=1, S2=1, C_v=1e9, C_u=1e9, lam=0.5)

saddle = problems.value_quadratic(np.diag([1.0, -0.5]))
out = run(saddle, RandomSource(0), np.array([5e-4, 0.0]), np.zeros(1), params,
          diagnose=exact_diagnostics(saddle))
phases = [r.phase for r in out.trajectory.rows]
first_exit = phases.index("exit")
print(f"saddle: episode opened at t=0, exited at t={first_exit}; "
      f"phi went {out.trajectory.rows[0].phi:.2e} -> {saddle.value(out.x_last):.3f} at the last iterate")

# Across seeds the escape is reliable.
exits = sum(run(saddle, RandomSource(s), np.array([5e-4, 0.0]), np.zeros(1), params).exits > 0
            for s in range(100))
print(f"early exits in {exits}/100 seeds")

# At a minimum nothing moves enough: the episode runs out and the anchor is returned.
bowl = problems.value_quadratic(np.eye(2))
out = run(bowl, RandomSource(0), np.zeros(2), np.zeros(1), params)
print("bowl:", out.reason, out.x_out, sosp_check(bowl, out.x_out, alpha=0.01).passes)
