"""
One-dimensional lemmas and the ray picture
==========================================

The n-dimensional statement reduces to rays through a zero.  Along each
ray the quotient of |x|^2 behaves like 2/r, so every ray integral of V^n r^(n-1)
diverges logarithmically; for a zero-free function none does.
"""

from blowup import ScalarField
from blowup.analysis import (
    minimal_multiplier, ode_uniqueness_sim, ray_survey, squared_gradient_at_zero,
)

rays = ray_survey(ScalarField.from_source("norm()^2", 2), [0.0, 0.0], K=64)
print("|x|^2 rays:", rays.counts())
flat = ray_survey(ScalarField.from_source("2 + sin(x1)", 2), [0.0, 0.0], K=64)
print("2 + sin(x1) rays:", flat.counts())

# The smallest multiplier lambda with |phi'| <= lambda |phi| x^((1-p)/p) is
# never p-integrable near a zero: its integral grows like k^p ln(1/h) for x^k.
for src, p in (("x1", 1.0), ("x1^2", 2.0)):
    d = minimal_multiplier(ScalarField.from_source(src, 1), p).diagnosis
    print(f"phi={src}, p={p}: {d.classification}, slope {d.b:.4f}")

# f' = V f from f(0) = 0: with V in L^1 the solution stays zero.
for src in ("abs(x1)^(-0.5)", "1/abs(x1)"):
    r = ode_uniqueness_sim(ScalarField.from_source(src, 1), 0.0)
    print(f"V={src}: sup|f|={r.sup_abs_f}, in L^1_loc={r.in_L_loc}")
    print("  ", r.note)

# The square of a Lipschitz function is differentiable at its zeros with zero gradient.
r = squared_gradient_at_zero(ScalarField.from_source("max(abs(x1), abs(x2))", 2), [0.0, 0.0])
print("|grad f^2| at 0 by central differences:", r.norms)
