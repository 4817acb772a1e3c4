"""Fields over domains, the gradient quotient, zero probing and extension."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr, parse, unparse, value_and_grad, evaluate_many

__all__ = [
    "Box", "Ball", "parse_domain", "format_domain",
    "ScalarField", "VectorMapping", "ZeroCellReport",
    "quotient_V", "quotient_values", "mapping_quotient",
    "zero_set_probe", "square_field", "mcshane_extend",
    "read_samples_csv", "IncompatibleSamplesError",
]

DEFAULT_ZERO_TOL = 1e-300


# Domains --------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"box needs lo < hi componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self):
        return len(self.lo)

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, X):
        X = np.atleast_2d(X)
        lo, hi = self.bounds()
        return np.all((X >= lo) & (X <= hi), axis=1)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if not c:
            raise ValueError("ball center must be nonempty")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self):
        return len(self.center)

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    @property
    def volume(self):
        n = self.n
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n

    def contains(self, X):
        X = np.atleast_2d(X)
        d = X - np.array(self.center)
        return np.sum(d * d, axis=1) <= self.radius**2 * (1 + 1e-12)


def _floats(text):
    return [float(t) for t in text.split(",")]


def parse_domain(spec):
    """Parse ``box:lo1,..,lon:hi1,..,hin`` or ``ball:c1,..,cn:radius``."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == "box" and len(parts) == 3:
            return Box(_floats(parts[1]), _floats(parts[2]))
        if parts[0] == "ball" and len(parts) == 3:
            return Ball(_floats(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad domain spec {spec!r}: {exc}") from None
    raise ValueError(f"bad domain spec {spec!r}; expected box:LO:HI or ball:CENTER:R")


def format_domain(domain):
    if isinstance(domain, Box):
        return "box:%s:%s" % (",".join(map(repr, domain.lo)), ",".join(map(repr, domain.hi)))
    return "ball:%s:%r" % (",".join(map(repr, domain.center)), domain.radius)


# Fields ---------------------------------------------------------------------

class ScalarField:
    """A real function on R^n with a pointwise gradient.

    ``fn(X, need_grad)`` receives an ``(N, n)`` array and returns the values
    and, when asked, the ``(N, n)`` gradients (else ``None``).
    """

    def __init__(self, n, fn, label=""):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n
        self._fn = fn
        self.label = label

    @classmethod
    def from_expr(cls, expr):
        def fn(X, need_grad):
            if need_grad:
                return value_and_grad(expr, X)
            return evaluate_many(expr, X), None
        return cls(expr.n, fn, unparse(expr))

    @classmethod
    def from_source(cls, source, n):
        return cls.from_expr(parse(source, n))

    @classmethod
    def from_callables(cls, n, value, grad, label=""):
        """Wrap vectorized ``value(X) -> (N,)`` and ``grad(X) -> (N, n)``."""
        def fn(X, need_grad):
            return value(X), grad(X) if need_grad else None
        return cls(n, fn, label)

    def __repr__(self):
        return f"ScalarField(n={self.n}, {self.label!r})"

    def _points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.n == 1 else X.reshape(1, -1)
        if X.shape[1] != self.n:
            raise ValueError(f"expected points in R^{self.n}, got shape {X.shape}")
        return X

    def values(self, X):
        return np.asarray(self._fn(self._points(X), False)[0], dtype=float)

    def values_and_grads(self, X):
        v, g = self._fn(self._points(X), True)
        return np.asarray(v, dtype=float), np.asarray(g, dtype=float)

    def __call__(self, point):
        return float(self.values(np.reshape(point, (1, self.n)))[0])

    def grad(self, point):
        return self.values_and_grads(np.reshape(point, (1, self.n)))[1][0]

    def modulus_and_slope(self, X):
        """``|f|`` and ``|grad f|`` at the rows of ``X``."""
        v, g = self.values_and_grads(X)
        return np.abs(v), np.sqrt(np.sum(g * g, axis=1))

    # derived fields

    def scaled(self, c):
        c = float(c)

        def fn(X, need_grad):
            v, g = self._fn(X, need_grad)
            return c * v, None if g is None else c * g
        return ScalarField(self.n, fn, f"{c!r}*({self.label})")

    def shifted(self, c):
        """The field ``f - c``."""
        c = float(c)

        def fn(X, need_grad):
            v, g = self._fn(X, need_grad)
            return v - c, g
        return ScalarField(self.n, fn, f"({self.label})-{c!r}")

    def rescaled(self, x0, r0):
        """The field ``y -> f(x0 + r0*y)``."""
        x0 = np.asarray(x0, dtype=float)
        r0 = float(r0)

        def fn(Y, need_grad):
            v, g = self._fn(x0 + r0 * Y, need_grad)
            return v, None if g is None else r0 * g
        return ScalarField(self.n, fn, f"({self.label})@affine")

    def restricted_to_line(self, x0, direction):
        """The 1-D field ``t -> f(x0 + t*direction)``."""
        x0 = np.asarray(x0, dtype=float)
        w = np.asarray(direction, dtype=float)

        def fn(T, need_grad):
            v, g = self._fn(x0 + T[:, :1] * w, need_grad)
            return v, None if g is None else (g @ w)[:, None]
        return ScalarField(1, fn, f"({self.label})|line")


class VectorMapping:
    """A mapping R^n -> R^m given by m scalar components."""

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("a mapping needs at least one component")
        n = components[0].n
        if any(c.n != n for c in components):
            raise ValueError("all components must share the same dimension")
        self.components = components
        self.n = n
        self.label = "(" + ", ".join(c.label for c in components) + ")"

    @classmethod
    def from_sources(cls, sources, n):
        return cls(ScalarField.from_source(s, n) for s in sources)

    @property
    def m(self):
        return len(self.components)

    def modulus_and_slope(self, X):
        """Euclidean norms of ``f`` and of its Jacobian (Frobenius)."""
        sq_v = 0.0
        sq_g = 0.0
        for c in self.components:
            v, g = c.values_and_grads(X)
            sq_v = sq_v + v * v
            sq_g = sq_g + np.sum(g * g, axis=1)
        return np.sqrt(sq_v), np.sqrt(sq_g)

    def __call__(self, point):
        return np.array([c(point) for c in self.components])


def quotient_values(field, X, zero_tol=DEFAULT_ZERO_TOL):
    """Vectorized ``|grad f| / |f|``, set to 0 where ``|f| <= zero_tol``.

    Works for :class:`ScalarField` and :class:`VectorMapping` alike.
    """
    mod, slope = field.modulus_and_slope(X)
    on_zero = mod <= zero_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        q = slope / np.where(on_zero, 1.0, mod)
    return np.where(on_zero, 0.0, q)


def quotient_V(field, point, zero_tol=DEFAULT_ZERO_TOL):
    """The gradient quotient at a single point (0 on the zero set)."""
    return float(quotient_values(field, np.reshape(point, (1, field.n)), zero_tol)[0])


def mapping_quotient(mapping, point, zero_tol=DEFAULT_ZERO_TOL):
    if isinstance(mapping, ScalarField):
        mapping = VectorMapping([mapping])
    return quotient_V(mapping, point, zero_tol)


def square_field(field):
    """``g = f**2`` with ``grad g = 2 f grad f`` (zero wherever f vanishes)."""
    def fn(X, need_grad):
        v, g = field._fn(X, need_grad)
        return v * v, None if g is None else 2.0 * v[:, None] * g
    return ScalarField(field.n, fn, f"({field.label})^2")


# Zero probing -----------------------------------------------------------------

@dataclass
class ZeroCellReport:
    """Grid cells flagged as containing a zero.

    ``cells`` holds integer multi-indices into a ``resolution``-per-axis grid
    over the domain's bounding box; ``lo``/``hi`` give the cell bounds.
    """

    resolution: int
    tol: float
    cells: list
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return len(self.cells)

    def cell_bounds(self, index):
        width = (self.hi - self.lo) / self.resolution
        a = self.lo + width * np.asarray(index)
        return a, a + width


def _cell_meets_domain(domain, a, b):
    if isinstance(domain, Box):
        return True
    c = np.array(domain.center)
    nearest = np.clip(c, a, b)
    return float(np.sum((nearest - c) ** 2)) <= domain.radius**2


def zero_set_probe(field, domain, resolution, tol=1e-12):
    """Flag grid cells that contain a detected zero of ``field``.

    Cells are half-open ``[a, b)`` (closed on the top face of the grid) so
    that every point of the bounding box lies in exactly one cell.  A cell is
    flagged when its corner values change sign strictly, or when one of its
    own corners (a corner lying in the half-open cell, i.e. its lowest
    corner, or a corner on the grid's top faces) has ``|f| <= tol``.  An
    empty report is not a proof that no zero exists.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    n = field.n
    lo, hi = domain.bounds()
    axes = [np.linspace(lo[k], hi[k], resolution + 1) for k in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = field.values(grid).reshape((resolution + 1,) * n)

    small = np.abs(vals) <= tol
    neg = vals < 0
    pos = vals > 0
    cells = []
    for idx in itertools.product(range(resolution), repeat=n):
        corner_slices = tuple(slice(i, i + 2) for i in idx)
        flagged = bool(np.any(neg[corner_slices]) and np.any(pos[corner_slices]))
        if not flagged:
            # corners owned by this cell: offset 0, or offset 1 on a top face
            own = tuple(
                slice(i, i + 2) if i == resolution - 1 else slice(i, i + 1)
                for i in idx)
            flagged = bool(np.any(small[own]))
        if flagged:
            a = lo + (hi - lo) * np.asarray(idx) / resolution
            b = a + (hi - lo) / resolution
            if _cell_meets_domain(domain, a, b):
                cells.append(idx)
    return ZeroCellReport(resolution, tol, cells, lo, hi)


# Lipschitz extension ----------------------------------------------------------

class IncompatibleSamplesError(ValueError):
    def __init__(self, i, j, message):
        super().__init__(message)
        self.pair = (i, j)


def mcshane_extend(samples, L):
    """Inf-convolution extension ``min_i (v_i + L |x - p_i|)``.

    The gradient follows the active sample (lowest index on ties).  Raises
    :class:`IncompatibleSamplesError` if some pair violates the Lipschitz
    bound.
    """
    if L < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    pts = np.array([np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in samples])
    vals = np.array([float(v) for _, v in samples])
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("need at least one sample with a consistent dimension")
    n = pts.shape[1]
    for i in range(len(pts)):
        d = np.sqrt(np.sum((pts[i + 1:] - pts[i]) ** 2, axis=1))
        gap = np.abs(vals[i + 1:] - vals[i]) - L * d
        bad = np.flatnonzero(gap > 1e-12 * (1 + np.abs(vals[i])))
        if bad.size:
            j = i + 1 + int(bad[0])
            raise IncompatibleSamplesError(
                i, j,
                f"samples {i} and {j} violate |v_i - v_j| <= L |p_i - p_j|: "
                f"{float(abs(vals[j] - vals[i]))!r} > {float(L * d[bad[0]])!r}")

    def fn(X, need_grad):
        diff = X[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        cand = vals[None, :] + L * dist
        k = np.argmin(cand, axis=1)  # first minimum on ties
        rows = np.arange(len(X))
        v = cand[rows, k]
        if not need_grad:
            return v, None
        dk = dist[rows, k]
        safe = np.where(dk > 0, dk, 1.0)
        g = np.where((dk > 0)[:, None], L * diff[rows, k] / safe[:, None], 0.0)
        return v, g
    return ScalarField(n, fn, f"mcshane(L={L!r}, {len(pts)} samples)")


def read_samples_csv(path):
    """Read ``x1..xn,value`` rows (header required) into (point, value) pairs."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty sample file")
        header = [h.strip() for h in header]
        n = len(header) - 1
        if n < 1 or header[-1] != "value" or header[:-1] != [f"x{i + 1}" for i in range(n)]:
            raise ValueError(f"{path}: header must be x1,..,xn,value, got {header}")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"{path}:{lineno}: expected {n + 1} columns")
            nums = [float(t) for t in row]
            samples.append((nums[:-1], nums[-1]))
    return samples


def as_field(obj, n=None):
    """Coerce an expression source, :class:`Expr` or field to a field."""
    if isinstance(obj, (ScalarField, VectorMapping)):
        return obj
    if isinstance(obj, Expr):
        return ScalarField.from_expr(obj)
    if isinstance(obj, str):
        if n is None:
            raise ValueError("dimension n required to parse an expression")
        return ScalarField.from_source(obj, n)
    raise TypeError(f"cannot make a field from {obj!r}")
