"""
Splitting a privacy budget over many noisy queries
==================================================

A run of the optimizer issues thousands of Gaussian queries. This script
shows how one target (epsilon, delta) is divided among them and what noise
level each query ends up with.
"""

import math

from dprgda import AlgoParams, PrivacyBudget
from dprgda.privacy import budget_report, calibrate, format_report

# The benchmark schedule: 400 outer steps, refresh every 10, five inner steps.
params = AlgoParams()
budget = PrivacyBudget(2.0, 1e-6)
cal = calibrate(params, budget, n=400)
print(format_report(budget_report(cal, budget)))

# The formula mode uses closed-form sigmas instead of the accountant.
formula = calibrate(params.replace(calibration="formula"), budget, n=400).noise
print("\nformula sigmas:", formula)

# Noise per query falls roughly like 1/epsilon.
for eps in (0.5, 1.0, 2.0, 4.0, 8.0):
    ns = calibrate(params, PrivacyBudget(eps, 1e-6), n=400).noise
    print(f"eps={eps:>4}: sigma_refresh={ns.sigma_refresh_x:8.3f} sigma_inc={ns.sigma_inc_x:8.3f}")

# Privacy off: every sigma is zero.
print("\ndisabled:", calibrate(params, PrivacyBudget(math.inf, 0.5), n=400).noise.is_zero)
