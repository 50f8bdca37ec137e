# %% [markdown]
# # The resolvent kernel of a Brownian spider
#
# A spider with three legs and leg weights (0.2, 0.3, 0.5).  The Green kernel
# is a density with respect to the speed measure; we look at its three
# branches, its symmetry, and the hitting-time transforms it generates.

# %%
import numpy as np

from spider_stop import SpiderModel, SpiderPoint, VERTEX, green_kernel, hitting_laplace

model = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5), r=0.5)
print("theta =", model.theta, " c_r =", model.cr)
print("g(0, 0) =", green_kernel(model, VERTEX, VERTEX).value)

# %% [markdown]
# Along leg 2, starting from a point on the same leg and from a point on a
# different leg.  The cross-leg kernel factorizes through the vertex.

# %%
src_same, src_other = SpiderPoint(1.0, 2), SpiderPoint(1.0, 1)
for y in np.linspace(0, 3, 7):
    tgt = SpiderPoint(float(y), 2)
    a = green_kernel(model, src_same, tgt)
    b = green_kernel(model, src_other, tgt)
    print(f"y={y:4.1f}  same leg {a.value:.6f} ({a.branch.value:17s})  other leg {b.value:.6f}")

# %% [markdown]
# Symmetry and the hitting transform: E_x[exp(-r H_y)] = g(x, y) / g(y, y).

# %%
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(1000):
    a = SpiderPoint(rng.uniform(0, 4), int(rng.integers(1, 4)))
    b = SpiderPoint(rng.uniform(0, 4), int(rng.integers(1, 4)))
    worst = max(worst, abs(green_kernel(model, a, b).value - green_kernel(model, b, a).value))
print("largest asymmetry over 1000 pairs:", worst)

tgt = SpiderPoint(1.5, 3)
for src in (VERTEX, SpiderPoint(0.5, 3), SpiderPoint(0.5, 1)):
    ratio = green_kernel(model, src, tgt).value / green_kernel(model, tgt, tgt).value
    print(src, hitting_laplace(model, src, tgt), ratio)
