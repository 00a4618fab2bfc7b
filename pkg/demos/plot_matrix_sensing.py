"""
Private matrix sensing benchmark
================================

Runs the three methods on the 20x20, rank-3, 400-measurement instance under
(epsilon, delta) = (2, 1e-6) and prints the final diagnostics table. Curvature
is evaluated every 20 steps to keep the script quick.
"""

from dprgda.harness import compare, config_from_mapping

configs = [config_from_mapping({"method": m, "seed": 0, "curvature_every": 20})
           for m in ("dp-rgda", "dp-sgda", "dp-spider-min")]

# ``compare`` checks that the runs share an instance and a budget.
out = compare(configs)
print(out["table"])

# Each row of the trajectory holds phi, gradient norm, lambda_min and epsilon spent.
traj = out["results"][0].trajectory
for row in traj.rows[::50]:
    print(f"t={row.t:3d} {row.phase:<8} phi={row.phi:8.4f} eps_spent={row.eps_spent:.3f}")
