"""Globally adaptive tensor-product cubature on boxes.

Each cell carries two estimates: a tensor rule (5-point Gauss-Lobatto by
default) on the whole cell and, for every axis, the same rule applied to the
two halves of the cell.
The largest of the d differences is the cell's error estimate and names the
axis along which the cell is bisected.  Splitting only along the axis that
matters keeps the cell count low for integrands whose singular or
discontinuous set is aligned with a coordinate (radial problems in polar
coordinates, for instance).

Cells are refined in batches: every cell whose error is at least a tenth of
the current maximum is split.  The totals are reduced with ``math.fsum`` so
the result does not depend on cell order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["CubatureResult", "adaptive_cubature"]


@dataclass
class CubatureResult:
    value: float
    err: float
    converged: bool
    cells: int
    evals: int


_LOBATTO5 = (
    np.array([-1.0, -math.sqrt(3 / 7), 0.0, math.sqrt(3 / 7), 1.0]),
    np.array([0.1, 49 / 90, 32 / 45, 49 / 90, 0.1]),
)


class _TensorRule:
    def __init__(self, d, q):
        # q=5 is Gauss-Lobatto: nodes on the cell faces, so a cell cut by a
        # jump always has nodes on both sides of it along the cut axis
        x, w = _LOBATTO5 if q == 5 else np.polynomial.legendre.leggauss(q)
        u = 0.5 * (x + 1.0)
        w = 0.5 * w
        self.d = d
        self.nodes = np.array(list(itertools.product(u, repeat=d)))
        self.weights = np.array([math.prod(c) for c in itertools.product(w, repeat=d)])
        # halves[j, s] are the nodes of the left (s=0) / right (s=1) half along axis j
        halves = np.empty((d, 2) + self.nodes.shape)
        for j in range(d):
            for s in range(2):
                h = self.nodes.copy()
                h[:, j] = 0.5 * (h[:, j] + s)
                halves[j, s] = h
        self.halves = halves

    def whole(self, f, lo, wid):
        pts = lo[:, None, :] + wid[:, None, :] * self.nodes[None]
        vals = f(pts.reshape(-1, self.d)).reshape(len(lo), -1)
        vol = np.prod(wid, axis=1)
        return vol * (vals @ self.weights)

    def split(self, f, lo, wid):
        """Half-cell integrals, shape ``(m, d, 2)``."""
        pts = lo[:, None, None, None, :] + wid[:, None, None, None, :] * self.halves[None]
        vals = f(pts.reshape(-1, self.d)).reshape(len(lo), self.d, 2, -1)
        vol = np.prod(wid, axis=1)
        return 0.5 * vol[:, None, None] * (vals @ self.weights)


def _initial_cells(lo, hi, init):
    d = len(lo)
    counts = np.broadcast_to(np.asarray(init, dtype=int), (d,))
    edges = [np.linspace(lo[k], hi[k], counts[k] + 1) for k in range(d)]
    cell_lo = []
    cell_wid = []
    for idx in itertools.product(*(range(c) for c in counts)):
        a = np.array([edges[k][i] for k, i in enumerate(idx)])
        b = np.array([edges[k][i + 1] for k, i in enumerate(idx)])
        cell_lo.append(a)
        cell_wid.append(b - a)
    return np.array(cell_lo), np.array(cell_wid)


def adaptive_cubature(f, lo, hi, rtol=1e-6, atol=0.0, max_cells=100_000,
                      q=5, init=None, batch_fraction=0.1):
    """Integrate ``f`` over the box ``[lo, hi]``.

    ``f`` maps an ``(N, d)`` array of points to ``(N,)`` values.  Refinement
    stops once the summed error estimate is below ``max(atol, rtol*|I|)``;
    if the cell budget runs out first the best estimate is returned with
    ``converged=False``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = len(lo)
    rule = _TensorRule(d, q)
    if init is None:
        init = 4 if d <= 2 else 2
    clo, cwid = _initial_cells(lo, hi, init)
    base = rule.whole(f, clo, cwid)
    evals = len(clo) * len(rule.weights)

    def assess(clo, cwid, base):
        halves = rule.split(f, clo, cwid)
        refined = halves.sum(axis=2)
        diffs = np.abs(refined - base[:, None])
        axis = np.argmax(diffs, axis=1)
        rows = np.arange(len(clo))
        return refined[rows, axis], diffs[rows, axis], axis, halves[rows, axis]

    val, err, axis, kids = assess(clo, cwid, base)
    evals += len(clo) * rule.halves[0, 0].shape[0] * 2 * d
    tiny = 1e-13 * np.max(hi - lo)

    while True:
        total = math.fsum(val)
        total_err = math.fsum(err)
        if not np.isfinite(total) or not np.isfinite(total_err):
            raise FloatingPointError("non-finite cubature estimate; integrand blows up")
        if total_err <= max(atol, rtol * abs(total)):
            converged = True
            break
        emax = float(err.max())
        pick = err >= batch_fraction * emax
        pick &= cwid[np.arange(len(cwid)), axis] > tiny
        m = int(pick.sum())
        if m == 0 or len(val) + m > max_cells:
            converged = False
            break
        plo = clo[pick]
        pwid = cwid[pick].copy()
        pax = axis[pick]
        pkids = kids[pick]
        rows = np.arange(m)
        pwid[rows, pax] *= 0.5
        right_lo = plo.copy()
        right_lo[rows, pax] += pwid[rows, pax]
        new_lo = np.concatenate([plo, right_lo])
        new_wid = np.concatenate([pwid, pwid])
        new_base = np.concatenate([pkids[:, 0], pkids[:, 1]])
        nval, nerr, nax, nkids = assess(new_lo, new_wid, new_base)
        evals += 2 * m * rule.halves[0, 0].shape[0] * 2 * d
        keep = ~pick
        clo = np.concatenate([clo[keep], new_lo])
        cwid = np.concatenate([cwid[keep], new_wid])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        axis = np.concatenate([axis[keep], nax])
        kids = np.concatenate([kids[keep], nkids])

    return CubatureResult(total, total_err, converged, len(val), evals)
