# %% [markdown]
# # Excessive functions and their representing measures
#
# Every normalized r-excessive function is a mixture of minimal ones: the
# decreasing solution phi (mass at the vertex), functions with a pole on a
# leg, and harmonic functions (mass at the end of a leg).  We build a mixture
# and read its weights back, then show a function that fails the test.

# %%
import numpy as np

from spider_stop import LegFunction, SpiderModel, SpiderPoint, VERTEX
from spider_stop.excessive import gluing_value, is_excessive, representing_measure_at_vertex
from spider_stop.kernels import minimal_excessive_leg_function

model = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5), r=0.5)
poles = [VERTEX, SpiderPoint(1.0, 2), SpiderPoint(np.inf, 3)]
weights = [0.5, 0.3, 0.2]
parts = [minimal_excessive_leg_function(model, p) for p in poles]
f = LegFunction(
    func=lambda x, leg: sum(w * u(x, leg) for w, u in zip(weights, parts)),
    dx=lambda x, leg, side=1: sum(w * u.dx(x, leg, side) for w, u in zip(weights, parts)),
    kinks=((1.0, 2),),
)

# %%
sigma = representing_measure_at_vertex(model, f)
print("vertex atom      :", sigma.vertex_atom)
print("atom at 1 on leg 2:", sigma.atom_at(1.0, 2))
for leg in (1, 2, 3):
    print(f"tail of leg {leg} beyond 0.5 / 2.0:", sigma.tail(0.5, leg), sigma.tail(2.0, leg))

# %% [markdown]
# The tails are non-increasing and the gluing value is non-positive, so the
# mixture passes.  Adding a constant to the killed increasing solution makes
# the gluing value +1: that function is not excessive.

# %%
print(is_excessive(model, f, np.linspace(0.1, 4, 40)).verdict)
bad = LegFunction(func=lambda x, leg: float(model.psi_killed(x)) + 1.0,
                  dx=lambda x, leg, side=1: float(model.dpsi_killed(x, side)))
print("gluing value:", gluing_value(model, bad))
report = is_excessive(model, bad, np.linspace(0.1, 4, 40))
print(report.verdict, report.failures)
