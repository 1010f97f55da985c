"""Small numeric kernels: adaptive Simpson quadrature and bracketing root search."""

import math

import numpy as np


def adaptive_simpson(f, a, b, tol=1e-9, max_depth=60):
    """Integrate ``f`` over the bounded interval ``[a, b]`` to absolute ``tol``.

    Uses the classic recursive Simpson scheme with Richardson correction.
    The interval is pre-split into 16 panels so narrow features are not
    skipped by the first estimate.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("adaptive_simpson needs a bounded interval")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo, hi, fa, fm, fb, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0
        return recurse(lo, mid, fa, flm, fm, left, eps / 2, depth - 1) + recurse(
            mid, hi, fm, frm, fb, right, eps / 2, depth - 1
        )

    panels = 16
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        lo, hi = float(lo), float(hi)
        fa, fb, fm = f(lo), f(hi), f(0.5 * (lo + hi))
        total += recurse(lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / panels, max_depth)
    return sign * total


def bisect_increasing(g, target, lo, hi, *, xtol=1e-12, atol=0.0, max_iter=2000):
    """Find ``x`` in ``[lo, hi]`` with ``g(x) = target`` for non-decreasing ``g``.

    Works element-wise on arrays: ``target``, ``lo`` and ``hi`` broadcast
    together and ``g`` must accept an array.  Iteration stops once every
    bracket is narrower than ``xtol`` (relative to the bracket scale) or the
    midpoint no longer moves; ``xtol=0`` runs to floating-point resolution.
    ``atol`` is an absolute floor on the bracket width, which keeps roots at
    zero from being chased into subnormal numbers.
    """
    target = np.asarray(target, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), target.shape).copy()
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = g(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        nxt = 0.5 * (lo + hi)
        if np.all((hi - lo <= np.maximum(xtol * scale, atol)) | (nxt == lo) | (nxt == hi)):
            break
    return 0.5 * (lo + hi)
