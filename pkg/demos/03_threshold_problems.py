# %% [markdown]
# # Threshold problems with linear and quadratic payoffs
#
# Payoff A_i x (or A_i x^2) on leg i.  The optimal rule stops on leg i once
# the spider is beyond a threshold z_i; legs with a larger coefficient stop
# earlier.  The solver runs Newton's method on the boundary equations and
# then checks the candidate against a battery of sufficient conditions.

# %%
import numpy as np

from spider_stop import SpiderModel, ThresholdFamily, solve_threshold_system
from spider_stop.osp import threshold_bounds, uniqueness_sweep

model = SpiderModel.brownian(3, r=0.5)
for kind in ("linear", "quadratic"):
    fam = ThresholdFamily(kind, (1.0, 2.0, 3.0))
    sol = solve_threshold_system(model, fam)
    print(kind, "thresholds:", sol.thresholds, " V(0) =", sol.value(0.0, 1))
    for name, status, detail in sol.diagnostics["verification"].rows():
        print(f"   {name:18s} {status}  {detail}")
    lo, hi = threshold_bounds(model, fam)
    print("   bounds:", lo, hi)
    print("   sign changes per leg along sweeps:", uniqueness_sweep(model, sol))

# %% [markdown]
# The value function on each leg: harmonic pasting between the vertex and the
# threshold, equal to the payoff beyond it.

# %%
sol = solve_threshold_system(model, ThresholdFamily("linear", (1.0, 2.0, 3.0)), verify=False)
for x in np.linspace(0, 2, 9):
    print(f"x={x:4.2f}  " + "  ".join(f"{sol.value(x, leg):.5f}/{sol.payoff(x, leg):.2f}"
                                      for leg in (1, 2, 3)))
