"""
The BBM functional and Lipschitz extension
==========================================

The double integral of |f(x) - f(y)| / |x - y|^(n+1) is infinite for every
non-constant f.  Cutting out |x - y| < h, the estimates grow without bound
as h shrinks.
"""

import numpy as np

from blowup import Box, ScalarField, bbm_estimate, mcshane_extend

square = Box((0.0, 0.0), (1.0, 1.0))
f = ScalarField.from_source("x1", 2)
for h in 2.0 ** -np.arange(3, 8):
    r = bbm_estimate(f, square, h, seed=42)
    print(f"h={h:.4f}  estimate={r.value:.4f} +- {r.err:.4f}")
print("constant:", bbm_estimate(ScalarField.from_source("1", 2), square, 2**-5).value)

# Lipschitz data on a few points extends to the whole plane without
# increasing the constant (min over samples of v_i + L |x - p_i|).
samples = [((0.0, 0.0), 0.0), ((1.0, 0.0), 1.0), ((0.0, 1.0), 0.5)]
ext = mcshane_extend(samples, 1.0)
print("values at samples:", ext.values(np.array([p for p, _ in samples])))
print("value at (0.5, 0.5):", ext(np.array([0.5, 0.5])))
