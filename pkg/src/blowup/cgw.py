"""Positive radial functions with a small logarithmic gradient integral.

The profile interpolates ``psi = B`` near the origin and ``psi = A`` outside
radius R.  In the variable ``t = ln r`` the log-profile ``u = ln psi`` is
piecewise linear (constant, linear on [ln delta, ln R], constant), which
minimises ``integral |u'|^n r^(n-1) dr`` for fixed end values; for that
profile

    integral_{delta<|x|<R} |grad log psi|^n dx
        = |S^(n-1)| * |ln A - ln B|^n * ln(R/delta)^(1-n).

The two corners are rounded off by convolving, in ``t``, with a C-infinity
bump of half-width ``collar = ln(R/delta)/200``.  Convolution in ``t`` leaves
the linear pieces untouched, so ``psi`` equals A and B exactly outside the
collars, and the integral can only drop (by at most 1%).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .fields import ScalarField

__all__ = [
    "RadialProfile", "CGWVerification", "construct", "verify", "as_field",
    "sphere_area", "coordinate_moment", "closed_form_integral",
    "write_profile_csv", "read_profile_csv",
]

COLLAR_FRACTION = 1 / 200


def sphere_area(n):
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def coordinate_moment(n):
    """``integral over S^(n-1) of |w_1|^n``."""
    return 2 * math.pi ** ((n - 1) / 2) * math.gamma((n + 1) / 2) / math.gamma(n)


def closed_form_integral(n, R, A, B, delta):
    """Total integral of the unmollified log-linear profile."""
    if A == B:
        return 0.0
    return sphere_area(n) * abs(math.log(B) - math.log(A)) ** n * math.log(R / delta) ** (1 - n)


# smooth step ---------------------------------------------------------------

def _smoothstep(x):
    """C-infinity step from 0 (x <= 0) to 1 (x >= 1); S(x) + S(1-x) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


_GL = np.polynomial.legendre.leggauss(48)


def _smoothstep_integral(x):
    """``integral_0^x S``, for x in [0, 1]."""
    nodes, weights = _GL
    x = np.asarray(x, dtype=float)
    pts = 0.5 * x[..., None] * (nodes + 1.0)
    return 0.5 * x * (_smoothstep(pts) @ weights)


def _ramp(tau, w):
    """Returns (G, F): the mollified ramp ``max(tau, 0)`` and its slope."""
    tau = np.asarray(tau, dtype=float)
    G = np.where(tau >= w, tau, 0.0)
    F = np.where(tau >= w, 1.0, 0.0)
    inside = np.abs(tau) < w
    if np.any(inside):
        x = (tau[inside] + w) / (2 * w)
        G[inside] = 2 * w * _smoothstep_integral(x)
        F[inside] = _smoothstep(x)
    return G, F


# profile -----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    n: int
    R: float
    A: float
    B: float
    delta: float
    eps_target: float
    collar: float
    note: str = ""

    @property
    def log_range(self):
        return math.log(self.R / self.delta)

    @property
    def inner_collar(self):
        return self.delta * math.exp(-self.collar), self.delta * math.exp(self.collar)

    @property
    def outer_collar(self):
        return self.R * math.exp(-self.collar), self.R * math.exp(self.collar)

    def _fraction(self, r):
        """Mollified fraction of the way from B (0) to A (1), and its t-slope."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.log(r)
        L = self.log_range
        G1, F1 = _ramp(t - math.log(self.delta), self.collar)
        G2, F2 = _ramp(t - math.log(self.R), self.collar)
        frac = np.clip((G1 - G2) / L, 0.0, 1.0)
        return frac, (F1 - F2) / L

    def psi(self, r):
        r = np.asarray(r, dtype=float)
        if self.A == self.B:
            return np.full(r.shape, self.A)
        frac, _ = self._fraction(r)
        lo, hi = min(self.A, self.B), max(self.A, self.B)
        val = np.clip(self.B * np.exp(frac * math.log(self.A / self.B)), lo, hi)
        val = np.where((frac == 0.0) | (r <= self.inner_collar[0]), self.B, val)
        return np.where((frac == 1.0) | (r >= self.outer_collar[1]), self.A, val)

    def log_slope(self, r):
        """``d(ln psi)/dr``."""
        r = np.asarray(r, dtype=float)
        if self.A == self.B:
            return np.zeros(r.shape)
        _, slope_t = self._fraction(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = math.log(self.A / self.B) * slope_t / r
        return np.where(slope_t == 0.0, 0.0, out)

    def dpsi(self, r):
        return self.psi(r) * self.log_slope(r)

    def samples(self, m=2001, r_max=None):
        """``(r, u)`` on a radial grid through both collars."""
        r_max = 2 * self.outer_collar[1] if r_max is None else r_max
        r = np.linspace(0.0, r_max, m)
        return r, np.log(self.psi(r))


def construct(n, R, A, B, eps_target):
    """Build a profile whose total integral is at most ``eps_target / 2``
    before mollification."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (R > 0 and A > 0 and B > 0 and eps_target > 0):
        raise ValueError("R, A, B and eps_target must be positive")
    note = ""
    if n == 2:
        note = "n = 2 is below the n >= 3 range of the original statement"
    if A == B:
        delta = R / 2
    else:
        delta_log = math.log(A / B)
        L = (2 * sphere_area(n) * abs(delta_log) ** n / eps_target) ** (1 / (n - 1))
        if L <= math.log(2):
            delta = R / 2
            note = (note + "; " if note else "") + "delta clamped to R/2"
        else:
            delta = R * math.exp(-L)
    collar = math.log(R / delta) * COLLAR_FRACTION
    return RadialProfile(n, float(R), float(A), float(B), delta, float(eps_target), collar, note)


# verification ------------------------------------------------------------------

@dataclass
class CGWVerification:
    entries: dict  # name -> (value, passed)

    @property
    def passed(self):
        return all(ok for _, ok in self.entries.values())

    def failures(self):
        return [k for k, (_, ok) in self.entries.items() if not ok]


def _radial_log_integral(profile, limit):
    """``integral_0^inf |d ln psi/dr|^n r^(n-1) dr``, by quadrature in t."""
    n = profile.n
    if profile.A == profile.B:
        return 0.0
    a0, a1 = profile.inner_collar
    b0, b1 = profile.outer_collar
    breaks = [math.log(a0), math.log(a1), math.log(b0), math.log(b1)]

    def integrand(t):
        r = math.exp(t)
        return abs(float(profile.log_slope(r)) * r) ** n

    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            total += quad(integrand, lo, hi, limit=limit, epsabs=0.0, epsrel=1e-11)[0]
    return total


def verify(profile, limit=200, grid_points=10_000, closed_form_rtol=0.01,
           boundary_tol=1e-12):
    """Re-check every constraint of a profile; failures are report entries."""
    n = profile.n
    radial = _radial_log_integral(profile, limit)
    total = sphere_area(n) * radial
    per_coord = coordinate_moment(n) * radial
    closed = closed_form_integral(n, profile.R, profile.A, profile.B, profile.delta)
    e = {}
    e["total_integral"] = (total, total <= profile.eps_target)
    for i in range(n):
        e[f"coordinate_integral_{i + 1}"] = (per_coord, per_coord < profile.eps_target)
    if closed > 0:
        rel = abs(total / closed - 1.0)
    else:
        rel = abs(total)
    e["closed_form_agreement"] = (rel, rel <= closed_form_rtol)

    a0, _ = profile.inner_collar
    _, b1 = profile.outer_collar
    inner = np.linspace(0.0, a0, 200)
    outer = np.linspace(b1, 4 * b1, 200)
    dev_in = float(np.max(np.abs(profile.psi(inner) - profile.B)))
    dev_out = float(np.max(np.abs(profile.psi(outer) - profile.A)))
    e["inner_value"] = (dev_in, dev_in <= boundary_tol)
    e["outer_value"] = (dev_out, dev_out <= boundary_tol)

    r = np.linspace(0.0, 2 * b1, grid_points)
    vals = profile.psi(r)
    lo, hi = min(profile.A, profile.B), max(profile.A, profile.B)
    over = float(max(np.max(vals) - hi, lo - np.min(vals), 0.0))
    e["min_max_bounds"] = (over, over == 0.0)

    e["c1_continuity"] = _c1_check(profile)
    return CGWVerification(e)


def _c1_check(profile):
    """Largest mismatch of psi' against central differences of psi and across
    collar joints, relative to max |psi'|."""
    joints = [*profile.inner_collar, *profile.outer_collar]
    scale = max(float(np.max(np.abs(profile.dpsi(np.geomspace(
        profile.inner_collar[0], profile.outer_collar[1], 4001))))), 1e-300)
    worst = 0.0
    for j in joints:
        eta = 1e-9 * j
        jump = abs(float(profile.dpsi(j + eta) - profile.dpsi(j - eta)))
        worst = max(worst, jump / scale)
        for x in (j * (1 - 1e-3), j, j * (1 + 1e-3)):
            h = 1e-6 * x
            fd = float(profile.psi(x + h) - profile.psi(x - h)) / (2 * h)
            worst = max(worst, abs(fd - float(profile.dpsi(x))) / scale)
    return worst, worst <= 1e-4


def as_field(profile):
    """The n-dimensional field ``x -> psi(|x|)``."""
    n = profile.n

    def fn(X, need_grad):
        r = np.sqrt(np.sum(X * X, axis=1))
        v = profile.psi(r)
        if not need_grad:
            return v, None
        dp = profile.dpsi(r)
        safe = np.where(r > 0, r, 1.0)
        g = np.where((r > 0)[:, None], (dp / safe)[:, None] * X, 0.0)
        return v, g
    return ScalarField(n, fn, f"cgw(n={n}, R={profile.R!r}, A={profile.A!r}, B={profile.B!r})")


# CSV ------------------------------------------------------------------------------

_PARAMS = ("n", "R", "A", "B", "delta", "eps_target", "collar")


def profile_csv_lines(profile, m=2001):
    lines = [f"# {k}={getattr(profile, k)!r}" for k in _PARAMS]
    lines.append("r,psi,dpsi")
    r = np.linspace(0.0, 2 * profile.outer_collar[1], m)
    for ri, pi, di in zip(r, profile.psi(r), profile.dpsi(r)):
        lines.append(f"{float(ri)!r},{float(pi)!r},{float(di)!r}")
    return lines


def write_profile_csv(profile, path, m=2001):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(profile_csv_lines(profile, m)) + "\n")


def read_profile_csv(path, check_tol=1e-12):
    """Load a profile written by :func:`write_profile_csv`.

    The parameters in the header rebuild the profile; the table is checked
    against it and a mismatch raises ``ValueError``.
    """
    params = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                if "=" in line:
                    k, v = line.lstrip("# ").split("=", 1)
                    params[k.strip()] = v.strip()
                continue
            if line == "r,psi,dpsi":
                continue
            rows.append([float(t) for t in line.split(",")])
    missing = [k for k in _PARAMS if k not in params]
    if missing:
        raise ValueError(f"{path}: header lacks {missing}")
    profile = RadialProfile(int(params["n"]), *(float(params[k]) for k in _PARAMS[1:]))
    table = np.array(rows)
    if table.size:
        dev = np.max(np.abs(profile.psi(table[:, 0]) - table[:, 1]))
        if dev > check_tol * max(profile.A, profile.B):
            raise ValueError(f"{path}: table disagrees with header parameters ({dev!r})")
    return profile


def tampered(profile, **changes):
    """A copy of ``profile`` with some fields replaced (for negative tests)."""
    return replace(profile, **changes)
