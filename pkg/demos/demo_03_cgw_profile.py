"""
A positive profile with small logarithmic energy
================================================

Between two positive constants one can interpolate by a smooth radial
function psi whose integral of |grad log psi|^n is as small as we like:
spend the change of log psi evenly in ln r over a very long range.
"""

import math
import tempfile
from pathlib import Path

from blowup import cgw

profile = cgw.construct(n=3, R=1.0, A=1.0, B=math.e, eps_target=2.0)
print("inner radius delta =", profile.delta)

ver = cgw.verify(profile)
for name, (value, ok) in ver.entries.items():
    print(f"{name:24s} {value:.6g}  {'pass' if ok else 'FAIL'}")

# Pulling the inner radius out to 0.5 shortens the log-range and the energy jumps.
bad = cgw.verify(cgw.tampered(profile, delta=0.5))
print("tampered profile fails:", bad.failures())

# Profiles are stored as CSV with the parameters in the header.
path = Path(tempfile.mkdtemp()) / "profile.csv"
cgw.write_profile_csv(profile, path)
print("reloaded equal:", cgw.read_profile_csv(path) == profile)
