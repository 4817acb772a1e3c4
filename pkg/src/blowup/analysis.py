"""Theorem-level procedures built on the excised quadrature.

* :func:`sobolev_check` -- is ``log|f - f(a)|`` in W^{1,p}?
* :func:`critical_exponent` -- bisection for the exponent where the excised
  quotient integral starts to diverge.
* :func:`ray_integral`, :func:`ray_survey` -- the quotient integrated along
  rays from a point, with the radial weight r^(n-1).
* :func:`minimal_multiplier` -- the one-dimensional multiplier
  ``lambda = |phi'| / (|phi| x^((1-p)/p))`` whose L^p norm must blow up.
* :func:`ode_uniqueness_sim` -- the extremal equation f' = V f from a zero.
* :func:`squared_gradient_at_zero` -- finite differences of f^2 at a zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .cubature import adaptive_cubature
from .fields import DEFAULT_ZERO_TOL, Ball, Box, ScalarField, quotient_values, zero_set_probe
from .quad import (
    DEFAULT_MAX_CELLS, DEFAULT_RTOL, ExcisionFamily, IntegralSeries, diagnose,
    excision_series, integrate_domain,
)

__all__ = [
    "PreconditionError", "BracketError",
    "SobolevReport", "CriticalExponentResult", "RayReport", "MultiplierReport",
    "UniquenessReport", "SquaredGradientReport",
    "sobolev_check", "critical_exponent", "ray_integral", "ray_survey",
    "sphere_directions", "minimal_multiplier", "ode_uniqueness_sim",
    "squared_gradient_at_zero", "lipschitz_estimate",
]

MEMBER = "member"
NON_MEMBER = "non-member"
INCONCLUSIVE = "inconclusive"

CAUCHY_RTOL = 1e-3


class PreconditionError(ValueError):
    pass


class BracketError(ValueError):
    pass


def _cauchy_ok(series):
    v = series.values
    return abs(v[-1] - v[-2]) <= CAUCHY_RTOL * abs(v[-1]) or abs(v[-1]) == 0.0


def _piecewise_series(integrand, levels, top, rtol=1e-10, label=""):
    """``integral_{levels[k]}^{top} integrand`` for each level, accumulated
    from the pieces between consecutive levels."""
    edges = np.concatenate([[top], levels])
    vals, errs, conv = [], [], []
    acc = []
    acc_err = []
    for k in range(len(levels)):
        a, b = float(edges[k + 1]), float(edges[k])
        res = adaptive_cubature(integrand, [a], [b], rtol=rtol, atol=1e-300)
        acc.append(res.value)
        acc_err.append(res.err)
        vals.append(math.fsum(acc))
        errs.append(math.fsum(acc_err))
        conv.append(res.converged)
    return IntegralSeries(levels, vals, errs, conv, label)


def _levels(family):
    return family.values() if isinstance(family, ExcisionFamily) else np.asarray(family, float)


# Sobolev membership ---------------------------------------------------------------

@dataclass
class SobolevReport:
    p: float
    log_norm: float
    log_series: IntegralSeries
    log_diagnosis: object
    grad_series: IntegralSeries
    grad_diagnosis: object
    verdict: str
    zero_cells: int
    probe_resolution: int


def sobolev_check(f, a, p, domain, family=ExcisionFamily(), rtol=DEFAULT_RTOL,
                  probe_resolution=16, max_cells=DEFAULT_MAX_CELLS):
    """Decide numerically whether ``log|f - f(a)|`` lies in W^{1,p}(domain).

    With ``a=None`` the function tested is ``log|f|`` itself.  Both the L^p
    norm of the logarithm and the L^p norm of its gradient are computed as
    excised series and diagnosed.  The verdict is ``non-member`` if either
    diverges, ``member`` only if both converge and pass a Cauchy test with
    relative tail below 1e-3, and ``inconclusive`` otherwise.  Zeros are
    probed on a grid of ``probe_resolution`` cells per axis (boundary
    included); only that grid is examined.
    """
    g = f if a is None else f.shifted(f(a))
    levels = _levels(family)

    def log_power(eps):
        def integrand(X):
            v = np.abs(g.values(X))
            keep = v > eps
            out = np.zeros(len(X))
            out[keep] = np.abs(np.log(v[keep])) ** p
            return out
        return integrand

    vals, errs, conv = [], [], []
    for eps in levels:
        res = integrate_domain(log_power(float(eps)), domain, rtol=rtol, max_cells=max_cells)
        vals.append(res.value)
        errs.append(res.err)
        conv.append(res.converged)
    log_series = IntegralSeries(levels, vals, errs, conv, "log")
    log_series.check_monotone()
    log_diag = diagnose(log_series)
    grad_series = excision_series(g, domain, p, levels, rtol=rtol, max_cells=max_cells)
    grad_diag = diagnose(grad_series)

    if log_diag.divergent or grad_diag.divergent:
        verdict = NON_MEMBER
    elif (log_diag.convergent and grad_diag.convergent
          and _cauchy_ok(log_series) and _cauchy_ok(grad_series)):
        verdict = MEMBER
    else:
        verdict = INCONCLUSIVE
    log_norm = max(log_diag.a, 0.0) ** (1.0 / p) if log_diag.convergent else math.inf
    probe = zero_set_probe(g, domain, probe_resolution)
    return SobolevReport(p, log_norm, log_series, log_diag, grad_series, grad_diag,
                         verdict, len(probe), probe_resolution)


# Critical exponent -----------------------------------------------------------------

@dataclass
class CriticalExponentResult:
    p_star: float
    lo: float
    hi: float
    probes: list = field(default_factory=list)  # (p, classification)

    @property
    def clean(self):
        """False if some interior probe was inconclusive."""
        return all(c != INCONCLUSIVE for _, c in self.probes)


def critical_exponent(f, domain, p_lo, p_hi, tol=0.05, family=ExcisionFamily(),
                      rtol=1e-4, max_cells=DEFAULT_MAX_CELLS):
    """Bisect for the exponent at which the excised quotient integral diverges.

    ``p_lo`` must diagnose convergent and ``p_hi`` divergent.  Interior probes
    that come out inconclusive are counted as divergent and recorded.
    """
    if not p_lo < p_hi:
        raise ValueError("need p_lo < p_hi")
    probes = []

    def classify(p):
        d = diagnose(excision_series(f, domain, p, family, rtol=rtol, max_cells=max_cells))
        probes.append((p, d.classification))
        return d

    d_lo = classify(p_lo)
    d_hi = classify(p_hi)
    if not (d_lo.convergent and d_hi.divergent):
        raise BracketError(
            f"endpoints do not separate: p={p_lo} is {d_lo.classification}, "
            f"p={p_hi} is {d_hi.classification}; widen the bracket")
    lo, hi = float(p_lo), float(p_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid).convergent:
            lo = mid
        else:
            hi = mid
    return CriticalExponentResult(0.5 * (lo + hi), lo, hi, probes)


# Rays ------------------------------------------------------------------------------

def sphere_directions(K, n, seed=42):
    """``K`` unit vectors spread over S^(n-1) by a scrambled Halton sequence."""
    if n == 1:
        return np.array([[1.0] if k % 2 == 0 else [-1.0] for k in range(K)])
    if n == 2:
        u = qmc.Halton(1, scramble=True, seed=seed).random(K)[:, 0]
        th = 2 * math.pi * u
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        u = qmc.Halton(2, scramble=True, seed=seed).random(K)
        z = 1.0 - 2.0 * u[:, 0]
        ph = 2 * math.pi * u[:, 1]
        s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return np.stack([s * np.cos(ph), s * np.sin(ph), z], axis=1)
    g = _normal.ppf(qmc.Halton(n, scramble=True, seed=seed).random(K))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _check_direction(omega, n):
    w = np.asarray(omega, dtype=float).reshape(-1)
    if w.size != n:
        raise ValueError(f"direction must have {n} components")
    if abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return w


def _ray_integrand(f, x0, w, p, zero_tol):
    n = f.n

    def g(T):
        r = T[:, 0]
        X = x0 + r[:, None] * w
        return quotient_values(f, X, zero_tol) ** p * r ** (n - 1)
    return g


def ray_integral(f, x0, omega, p, rho, domain=None, rtol=1e-10,
                 zero_tol=DEFAULT_ZERO_TOL):
    """Integral of ``V(x0 + r w)**p * r**(n-1)`` over ``rho <= r <= 1``."""
    n = f.n
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    w = _check_direction(omega, n)
    if not 0 < rho < 1:
        raise ValueError("cutoff must lie in (0, 1)")
    if domain is not None:
        ends = np.stack([x0 + rho * w, x0 + w])
        if not np.all(domain.contains(ends)):
            raise ValueError("ray segment leaves the domain")
    res = adaptive_cubature(_ray_integrand(f, x0, w, p, zero_tol), [rho], [1.0],
                            rtol=rtol, atol=1e-300)
    return res.value


@dataclass
class RayReport:
    center: np.ndarray
    radius: float
    p: float
    directions: np.ndarray
    series: list
    diagnoses: list

    @property
    def divergent_count(self):
        return sum(d.divergent for d in self.diagnoses)

    @property
    def fraction_divergent(self):
        return self.divergent_count / len(self.diagnoses)

    def counts(self):
        out = {}
        for d in self.diagnoses:
            out[d.classification] = out.get(d.classification, 0) + 1
        return out


def _inner_radius(domain, x0):
    if isinstance(domain, Box):
        lo, hi = domain.bounds()
        return float(min(np.min(x0 - lo), np.min(hi - x0)))
    return domain.radius - float(np.linalg.norm(x0 - np.array(domain.center)))


def ray_survey(f, x0, K=64, p=None, family=ExcisionFamily(), domain=None, seed=42,
               rtol=1e-10, zero_tol=DEFAULT_ZERO_TOL):
    """Ray integral series in ``K`` quasi-uniform directions from ``x0``.

    If a domain is given and the unit ball around ``x0`` does not fit, the
    field is first rescaled by the affine map ``y -> x0 + r0*y`` with ``r0``
    the distance from ``x0`` to the boundary, so the rays always run over
    ``[rho, 1]`` in the rescaled variable.  ``p`` defaults to n.
    """
    n = f.n
    p = n if p is None else p
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    r0 = 1.0
    if domain is not None:
        if not domain.contains(x0[None])[0]:
            raise ValueError("center must lie in the domain")
        r0 = min(1.0, _inner_radius(domain, x0))
        if r0 <= 0:
            raise ValueError("center lies on the domain boundary")
    g = f.rescaled(x0, r0)
    origin = np.zeros(n)
    dirs = sphere_directions(K, n, seed)
    levels = _levels(family)
    series, diags = [], []
    for w in dirs:
        s = _piecewise_series(_ray_integrand(g, origin, w, p, zero_tol), levels, 1.0, rtol)
        series.append(s)
        diags.append(diagnose(s))
    return RayReport(x0, r0, p, dirs, series, diags)


# One-dimensional uniqueness ------------------------------------------------------------

@dataclass
class MultiplierReport:
    p: float
    levels: np.ndarray
    series: IntegralSeries
    diagnosis: object


def minimal_multiplier(phi, p, family=ExcisionFamily(), tol=1e-12, rtol=1e-10):
    """Series of ``integral_h^1 lambda**p`` for the smallest admissible
    multiplier ``lambda = |phi'| / (|phi| x^((1-p)/p))`` (0 where phi = 0)."""
    if phi.n != 1:
        raise ValueError("phi must be a function of one variable")
    if p < 1:
        raise ValueError("p must be >= 1")
    if abs(phi(0.0)) > tol:
        raise PreconditionError(f"phi(0) = {phi(0.0)!r} is not zero")

    def lam_p(T):
        x = T[:, 0]
        return quotient_values(phi, T) ** p * x ** (p - 1)

    levels = _levels(family)
    s = _piecewise_series(lam_p, levels, 1.0, rtol, "lambda^p")
    return MultiplierReport(p, levels, s, diagnose(s))


@dataclass
class UniquenessReport:
    sup_abs_f: float
    steps: int
    n: int
    integrability_series: IntegralSeries
    integrability: object
    in_L_loc: bool | None
    note: str


_GL4 = np.polynomial.legendre.leggauss(4)


def _step_integrals(V, edges):
    """Gauss-Legendre integrals of V over consecutive intervals."""
    x, w = _GL4
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = (mid[:, None] + half[:, None] * x[None]).reshape(-1, 1)
    vals = V.values(nodes).reshape(len(a), -1)
    if np.any(vals < 0):
        raise ValueError("V must be non-negative")
    return half * (vals @ w)


def ode_uniqueness_sim(V, x0, h=1e-3, horizon=1.0, n=1, family=ExcisionFamily(),
                       rtol=1e-10):
    """Integrate ``f' = V f`` from ``f(x0) = 0`` in both directions.

    The scheme is the exponential one-step map
    ``f_{k+1} = f_k * exp(integral of V over the step)`` with 4-point
    Gauss-Legendre nodes, so V is never evaluated at the step ends (and in
    particular not at x0).  The report also gives the excised series of
    ``integral_{eps < |x - x0| < horizon} V**n`` and its diagnosis.
    """
    if V.n != 1:
        raise ValueError("V must be a function of one variable")
    if h <= 0 or horizon <= 0:
        raise ValueError("step and horizon must be positive")
    steps = int(math.ceil(horizon / h))
    sup = 0.0
    for sign in (1.0, -1.0):
        edges = x0 + sign * np.linspace(0.0, horizon, steps + 1)
        if sign < 0:
            edges = edges[::-1]
        growth = np.exp(_step_integrals(V, edges))
        if sign < 0:
            growth = growth[::-1]
        f = 0.0
        for gk in growth:
            f = f * gk
            sup = max(sup, abs(f))

    def v_power(T):
        vals = V.values(T)
        if np.any(vals < 0):
            raise ValueError("V must be non-negative")
        return vals**n

    def both_sides(T):
        t = T[:, 0]
        return v_power((x0 + t)[:, None]) + v_power((x0 - t)[:, None])

    levels = _levels(family) * horizon
    s = _piecewise_series(both_sides, levels, horizon, rtol, f"V^{n}")
    d = diagnose(s)
    in_L = True if d.convergent else (False if d.divergent else None)
    if in_L is False:
        note = (f"V is not in L^{n} near x0 ({d.classification}); the zero solution "
                "need not be unique: f(x) = exp(-integral_x^{x1} V) is a nonzero "
                "solution of |f'| = V|f| that tends to 0 at x0")
    elif in_L:
        note = f"V is in L^{n} near x0; only the zero solution starts from f(x0) = 0"
    else:
        note = f"integrability of V^{n} near x0 is inconclusive"
    return UniquenessReport(sup, 2 * steps, n, s, d, in_L, note)


@dataclass
class SquaredGradientReport:
    hs: np.ndarray
    norms: np.ndarray
    order: float

    def bounded_by(self, C):
        """True if every norm is at most ``C * h``."""
        return bool(np.all(self.norms <= C * self.hs))


def squared_gradient_at_zero(f, x0, hs=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5), tol=1e-12):
    """Central-difference gradient norms of ``f**2`` at a zero ``x0``.

    ``order`` is the fitted slope of log(norm) against log(h); it is ``inf``
    when every norm is exactly zero.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if abs(f(x0)) > tol:
        raise PreconditionError(f"f(x0) = {f(x0)!r} is not zero")
    n = f.n
    hs = np.asarray(hs, dtype=float)
    norms = []
    eye = np.eye(n)
    for h in hs:
        plus = f.values(x0 + h * eye) ** 2
        minus = f.values(x0 - h * eye) ** 2
        norms.append(float(np.linalg.norm((plus - minus) / (2 * h))))
    norms = np.array(norms)
    nz = norms > 0
    if nz.sum() >= 2:
        order = float(np.polyfit(np.log(hs[nz]), np.log(norms[nz]), 1)[0])
    elif nz.sum() == 0:
        order = math.inf
    else:
        order = math.nan
    return SquaredGradientReport(hs, norms, order)


def lipschitz_estimate(f, domain, resolution=32):
    """Largest grid difference quotient between neighbouring grid points."""
    lo, hi = domain.bounds()
    n = f.n
    axes = [np.linspace(lo[k], hi[k], resolution + 1) for k in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = f.values(grid.reshape(-1, n)).reshape(grid.shape[:-1])
    best = 0.0
    for k in range(n):
        step = (hi[k] - lo[k]) / resolution
        best = max(best, float(np.max(np.abs(np.diff(vals, axis=k)))) / step)
    return best
