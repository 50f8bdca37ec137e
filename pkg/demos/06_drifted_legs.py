# %% [markdown]
# # Beyond Brownian legs
#
# The library only needs the scale, the speed density and the two fundamental
# solutions of each leg.  Here every leg carries a Brownian motion with drift
# towards the vertex; the threshold equations are then solved by quadrature
# of the Green kernel instead of closed forms.

# %%
import numpy as np

from spider_stop import (
    SpiderModel,
    ThresholdFamily,
    drifted_brownian_characteristics,
    solve_threshold_system,
    validate_characteristics,
)

chars = drifted_brownian_characteristics(0.3)
print(validate_characteristics(chars, r=0.7, grid=np.linspace(0.1, 5, 25)).failures or "characteristics ok")

model = SpiderModel(3, (0.2, 0.3, 0.5), 0.7, chars)
for kind in ("linear", "quadratic"):
    sol = solve_threshold_system(model, ThresholdFamily(kind, (1.0, 2.0, 3.0)))
    rep = sol.diagnostics["verification"]
    print(kind, sol.diagnostics["method"], sol.thresholds, "checks passed:", rep.passed)

# %% [markdown]
# The drift pulls the spider back towards the vertex, so waiting is less
# attractive and every threshold is lower than for plain Brownian legs.

# %%
plain = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5), r=0.7)
print(solve_threshold_system(plain, ThresholdFamily("linear", (1.0, 2.0, 3.0)), verify=False).thresholds)
