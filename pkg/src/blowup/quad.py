"""Excised integrals of the gradient quotient and divergence diagnosis.

For a field f on a domain the excised integral is

    I_p(eps) = integral over {x : |f(x)| > eps} of (|grad f| / |f|)^p dx

and its behaviour as eps -> 0 is read off a series of levels by fitting
three tail models (see :func:`diagnose`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .cubature import CubatureResult, adaptive_cubature
from .fields import DEFAULT_ZERO_TOL, Ball, Box

__all__ = [
    "ExcisionFamily", "QuadResult", "IntegralSeries", "DivergenceDiagnosis",
    "BBMResult", "QuadratureError",
    "integrate_domain", "integrate_excised", "excision_series", "diagnose",
    "bbm_estimate", "CONVERGENT", "DIVERGENT_LOG", "DIVERGENT_POWER",
    "INCONCLUSIVE",
]

CONVERGENT = "convergent"
DIVERGENT_LOG = "divergent-log"
DIVERGENT_POWER = "divergent-power"
INCONCLUSIVE = "inconclusive"

DEFAULT_RTOL = 1e-5
DEFAULT_MAX_CELLS = 200_000


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExcisionFamily:
    """Levels ``eps0 * ratio**k`` for ``k = 0 .. levels-1``."""

    eps0: float = 1e-2
    ratio: float = 0.1
    levels: int = 5

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.levels < 3:
            raise ValueError("need at least 3 levels")

    def values(self):
        return self.eps0 * self.ratio ** np.arange(self.levels)


QuadResult = CubatureResult


# Integration over domains -------------------------------------------------------

def _polar2(center):
    def to_x(P):
        r, th = P[:, 0], P[:, 1]
        X = center + r[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
        return X, r
    return to_x


def _polar3(center):
    def to_x(P):
        r, th, ph = P[:, 0], P[:, 1], P[:, 2]
        st = np.sin(th)
        u = np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=1)
        return center + r[:, None] * u, r * r * st
    return to_x


def integrate_domain(integrand, domain, rtol=DEFAULT_RTOL, atol=0.0,
                     max_cells=DEFAULT_MAX_CELLS):
    """Adaptive integral of ``integrand`` (vectorized over rows) on a domain.

    Boxes are integrated directly.  Balls use polar coordinates for n <= 3
    and the bounding box with an indicator for n = 4.
    """
    n = domain.n
    if n > 4:
        raise NotImplementedError("deterministic cubature supports n <= 4")
    opts = dict(rtol=rtol, atol=atol, max_cells=max_cells)
    if isinstance(domain, Box) or n == 1:
        lo, hi = domain.bounds()
        return adaptive_cubature(integrand, lo, hi, **opts)
    if not isinstance(domain, Ball):
        raise TypeError(f"unsupported domain {domain!r}")
    c = np.array(domain.center)
    R = domain.radius
    if n in (2, 3):
        to_x = _polar2(c) if n == 2 else _polar3(c)

        def g(P):
            X, jac = to_x(P)
            return integrand(X) * jac
        if n == 2:
            return adaptive_cubature(g, [0.0, 0.0], [R, 2 * math.pi], init=(4, 4), **opts)
        return adaptive_cubature(g, [0.0, 0.0, 0.0], [R, math.pi, 2 * math.pi],
                                 init=(2, 2, 4), **opts)

    def g_box(X):
        inside = domain.contains(X)
        out = np.zeros(len(X))
        if inside.any():
            out[inside] = integrand(X[inside])
        return out
    lo, hi = domain.bounds()
    return adaptive_cubature(g_box, lo, hi, **opts)


def _quotient_power(field, p, eps, zero_tol):
    thresh = max(eps, zero_tol)

    def g(X):
        mod, slope = field.modulus_and_slope(X)
        keep = mod > thresh
        out = np.zeros(len(X))
        out[keep] = (slope[keep] / mod[keep]) ** p
        return out
    return g


def integrate_excised(field, domain, p, eps, rtol=DEFAULT_RTOL,
                      max_cells=DEFAULT_MAX_CELLS, zero_tol=DEFAULT_ZERO_TOL):
    """``I_p(eps)``: the quotient to the power p over ``{|f| > eps}``.

    Returns a :class:`QuadResult`; ``converged`` is False when the cell
    budget ran out before the tolerance was met.
    """
    if not p > 0:
        raise ValueError("exponent p must be positive")
    if not eps > 0:
        raise ValueError("excision level must be positive")
    if field.n != domain.n:
        raise ValueError(f"field is on R^{field.n}, domain on R^{domain.n}")
    return integrate_domain(_quotient_power(field, p, eps, zero_tol), domain,
                            rtol=rtol, max_cells=max_cells)


# Series -------------------------------------------------------------------------

@dataclass
class IntegralSeries:
    """Excised integral estimates over decreasing levels."""

    eps: np.ndarray
    values: np.ndarray
    errs: np.ndarray
    converged: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errs = np.asarray(self.errs, dtype=float)
        self.converged = np.asarray(self.converged, dtype=bool)
        if not (len(self.eps) == len(self.values) == len(self.errs) == len(self.converged)):
            raise ValueError("series columns differ in length")
        if np.any(np.diff(self.eps) >= 0):
            raise ValueError("levels must be strictly decreasing")

    def __len__(self):
        return len(self.eps)

    @classmethod
    def from_values(cls, eps, values, errs=None):
        values = np.asarray(values, dtype=float)
        if errs is None:
            errs = np.zeros_like(values)
        return cls(eps, values, errs, np.ones(len(values), dtype=bool))

    def rows(self):
        for e, v, r, c in zip(self.eps, self.values, self.errs, self.converged):
            yield float(e), float(v), float(r), bool(c)

    @property
    def all_converged(self):
        return bool(self.converged.all())

    def check_monotone(self):
        """Raise if a later (smaller-eps) value falls below an earlier one."""
        v, e = self.values, self.errs
        slack = 3 * (e[1:] + e[:-1]) + 1e-12 * np.abs(v[:-1])
        bad = np.flatnonzero(v[1:] < v[:-1] - slack)
        if bad.size:
            k = int(bad[0])
            raise QuadratureError(
                f"series decreases from eps={self.eps[k]!r} ({v[k]!r}) to "
                f"eps={self.eps[k + 1]!r} ({v[k + 1]!r})")


def _series(integrate_one, levels, label=""):
    vals, errs, conv = [], [], []
    for eps in levels:
        res = integrate_one(float(eps))
        vals.append(res.value)
        errs.append(res.err)
        conv.append(res.converged)
    s = IntegralSeries(levels, vals, errs, conv, label)
    s.check_monotone()
    return s


def excision_series(field, domain, p, family=ExcisionFamily(), **kw):
    """One :func:`integrate_excised` per level of ``family``."""
    levels = family.values() if isinstance(family, ExcisionFamily) else np.asarray(family)
    return _series(lambda e: integrate_excised(field, domain, p, e, **kw), levels,
                   getattr(field, "label", ""))


# Diagnosis -----------------------------------------------------------------------

@dataclass
class DivergenceDiagnosis:
    """Winning tail model for an integral series.

    Models, with ``L = ln(1/eps)``:

    * ``constant``: ``a + b*eps**kappa`` (kappa > 0), limit ``a``; reported
      with ``gamma = -kappa``.
    * ``log``: ``a + b*L``; ``gamma = 0``.
    * ``power``: ``a + b*eps**(-gamma)`` (gamma > 0).

    ``residuals`` are the residual sums of squares (noise floor included).
    """

    classification: str
    a: float
    b: float
    gamma: float
    b_stderr: float
    residuals: dict = field(default_factory=dict)
    note: str = ""

    @property
    def divergent(self):
        return self.classification in (DIVERGENT_LOG, DIVERGENT_POWER)

    @property
    def convergent(self):
        return self.classification == CONVERGENT


_S_MIN = 1e-3
_S_MAX = 10.0
_WIN = 10.0
_TIE = 2.0
_SIGNIF = 3.0


def _linfit(basis, y, floor, nparams):
    """Least squares for ``y ~ a + b*basis``; returns (a, b, rss, se_b)."""
    scale = float(np.max(np.abs(basis))) or 1.0
    A = np.column_stack([np.ones_like(basis), basis / scale])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rss = float(resid @ resid)
    dof = max(len(y) - nparams, 1)
    try:
        cov = np.linalg.inv(A.T @ A) * (rss + floor) / dof
        se = math.sqrt(max(cov[1, 1], 0.0)) / scale
    except np.linalg.LinAlgError:
        se = math.inf
    return float(coef[0]), float(coef[1] / scale), rss, se


def _fit_exponent(L, y, floor, sign):
    """Best ``a + b*exp(sign*s*L)`` over ``s`` in [_S_MIN, s_max]."""
    s_max = min(_S_MAX, 300.0 / max(float(np.max(np.abs(L))), 1e-300))
    grid = np.geomspace(_S_MIN, s_max, 121)

    def rss(s):
        return _linfit(np.exp(sign * s * L), y, floor, 3)[2]

    r = np.array([rss(s) for s in grid])
    k = int(np.argmin(r))
    best_s, best_r = float(grid[k]), float(r[k])
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if hi > lo:
        opt = minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13 * max(1.0, hi)})
        if opt.fun <= best_r:
            best_s = float(opt.x)
    a, b, rr, se = _linfit(np.exp(sign * best_s * L), y, floor, 3)
    return best_s, a, b, rr, se


def diagnose(series, eps=None):
    """Classify the tail of an integral series.

    ``series`` is an :class:`IntegralSeries`, or a sequence of values with the
    levels given in ``eps``.  Rules:

    * a series whose spread is within its error estimates (or 1e-12
      relative) is ``convergent`` with limit the last value;
    * ``divergent-log`` needs the log model to beat the constant model's
      residual by 10x, the power model's by 2x, and ``b > 3*se(b)``;
    * ``divergent-power`` likewise with the roles of log and power swapped;
    * ``convergent`` needs the constant model to beat both others by 10x;
    * anything else is ``inconclusive``.
    """
    if not isinstance(series, IntegralSeries):
        series = IntegralSeries.from_values(eps, series)
    if len(series) < 3:
        raise ValueError("diagnose needs at least 3 levels")
    y = series.values
    errs = series.errs
    L = np.log(1.0 / series.eps)
    scale = float(np.max(np.abs(y))) or 1.0
    spread = float(np.max(y) - np.min(y))
    floor = float(errs @ errs) + len(y) * (1e-13 * scale) ** 2

    if spread <= max(1e-12 * scale, 2.0 * float(np.max(errs))):
        return DivergenceDiagnosis(CONVERGENT, float(y[-1]), 0.0, math.nan, 0.0,
                                   {"constant": floor, "log": floor, "power": floor},
                                   "flat series")

    a_l, b_l, r_l, se_l = _linfit(L, y, floor, 2)
    k_c, a_c, b_c, r_c, se_c = _fit_exponent(L, y, floor, -1.0)
    g_p, a_p, b_p, r_p, se_p = _fit_exponent(L, y, floor, +1.0)
    R = {"constant": r_c + floor, "log": r_l + floor, "power": r_p + floor}

    best = min(R, key=R.get)
    if best == "log" and R["log"] * _WIN <= R["constant"] and R["log"] * _TIE <= R["power"] \
            and b_l > _SIGNIF * se_l:
        return DivergenceDiagnosis(DIVERGENT_LOG, a_l, b_l, 0.0, se_l, R)
    if best == "power" and R["power"] * _WIN <= R["constant"] and R["power"] * _TIE <= R["log"] \
            and b_p > _SIGNIF * se_p:
        return DivergenceDiagnosis(DIVERGENT_POWER, a_p, b_p, g_p, se_p, R)
    if best == "constant" and R["constant"] * _WIN <= min(R["log"], R["power"]):
        return DivergenceDiagnosis(CONVERGENT, a_c, b_c, -k_c, se_c, R)
    params = {"log": (a_l, b_l, 0.0, se_l), "power": (a_p, b_p, g_p, se_p),
              "constant": (a_c, b_c, -k_c, se_c)}[best]
    return DivergenceDiagnosis(INCONCLUSIVE, *params, R, f"closest model: {best}")


# BBM double integral -------------------------------------------------------------

@dataclass
class BBMResult:
    value: float
    err: float
    strata: int
    pairs: int
    budget_ok: bool


def _stratified(rng, lo, hi, s):
    n = len(lo)
    grid = np.stack(np.meshgrid(*([np.arange(s)] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return lo + (grid + rng.random(grid.shape)) * (hi - lo) / s


def _bbm_sum(fx, X, fy, Y, h, n, chunk, transpose):
    if transpose:
        fx, X, fy, Y = fy, Y, fx, X
    parts = []
    for i in range(0, len(X), chunk):
        diff = X[i:i + chunk, None, :] - Y[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        num = np.abs(fx[i:i + chunk, None] - fy[None, :])
        far = dist > h
        term = np.zeros_like(dist)
        term[far] = num[far] / dist[far] ** (n + 1)
        parts.append(float(np.sum(term)))
    return math.fsum(parts)


def bbm_estimate(field, domain, h, strata=64, seed=42, replicates=2,
                 max_pairs=2**25, swap=False):
    """Estimate the double integral of ``|f(x)-f(y)| / |x-y|**(n+1)`` over
    ``|x - y| > h``.

    Product-stratified sampling: each replicate draws one point per cell of
    a ``strata``-per-axis grid for x and, independently, for y, and sums over
    all pairs.  If ``strata**(2n)`` exceeds ``max_pairs`` the strata count is
    halved until it fits and ``budget_ok`` is False.  ``swap`` evaluates the
    sum with the roles of x and y exchanged.
    """
    if not h > 0:
        raise ValueError("cutoff h must be positive")
    n = domain.n
    s = int(strata)
    while s > 1 and s ** (2 * n) > max_pairs:
        s //= 2
    lo, hi = domain.bounds()
    cell_vol = float(np.prod(hi - lo)) / s**n
    chunk = max(1, 2**21 // s**n)
    estimates = []
    for child in np.random.SeedSequence(seed).spawn(replicates):
        rng = np.random.default_rng(child)
        X = _stratified(rng, lo, hi, s)
        Y = _stratified(rng, lo, hi, s)
        wx = domain.contains(X)
        wy = domain.contains(Y)
        X, Y = X[wx], Y[wy]
        fx = field.values(X)
        fy = field.values(Y)
        total = _bbm_sum(fx, X, fy, Y, h, n, chunk, swap)
        estimates.append(total * cell_vol * cell_vol)
    est = np.array(estimates)
    err = float(est.std(ddof=1) / math.sqrt(len(est))) if len(est) > 1 else math.nan
    return BBMResult(math.fsum(estimates) / len(estimates), err, s, s ** (2 * n),
                     s == int(strata))
