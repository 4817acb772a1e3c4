"""
Blow-up of the gradient quotient for |x|^2
==========================================

For f(x) = |x|^2 the quotient V = |grad f| / |f| equals 2/|x|.  Its p-th
power is integrable near the origin exactly when p < n, and at p = n the
excised integral grows like a logarithm.
"""

import math

from blowup import Ball, ExcisionFamily, ScalarField, diagnose, excision_series
from blowup.analysis import critical_exponent

f = ScalarField.from_source("norm()^2", 2)
disc = Ball((0.0, 0.0), 1.0)
family = ExcisionFamily(eps0=1e-2, ratio=0.1, levels=5)

# At p = n = 2 the integral over {|f| > eps} is 4 pi ln(1/eps) in closed form.
series = excision_series(f, disc, 2.0, family)
for eps, value, err, _ in series.rows():
    print(f"eps={eps:.0e}  I={value:10.4f}  closed form={4 * math.pi * math.log(1 / eps):10.4f}")

# The tail model picks the logarithm; b estimates 4 pi.
d = diagnose(series)
print(d.classification, "slope", round(d.b, 5), "vs 4pi", round(4 * math.pi, 5))

# Below the critical exponent the series settles at 4 pi.
print("p=1:", diagnose(excision_series(f, disc, 1.0, family)).classification)

# Bisection on p locates the switch from convergent to divergent.
res = critical_exponent(f, disc, 1.0, 3.0, tol=0.05)
print("critical exponent estimate:", res.p_star, "bracket", (res.lo, res.hi))
