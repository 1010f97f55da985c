"""Bias models mapping latent utilities to observed ones.

Two families are supported:

* :class:`MultiplicativeBias`: an item in cell ``sigma`` is observed at
  ``w * prod(beta_l for groups l in sigma)``.
* :class:`GeneralBias`: one strictly increasing function per cell, either a
  power of the multiplicative factor (``x * beta_sigma ** q``) or a monotone
  piecewise-linear curve.

Each cell function is linear on a finite list of segments, which keeps the
continuous-program integrals in closed form.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .distributions import assumption2_c, support_grid
from .exceptions import AssumptionViolation, ValidationError
from .validation import check_utilities

MIN_KNOT_RISE = 1e-12


class LinearCell:
    """``b(x) = slope * x``."""

    def __init__(self, slope):
        self.slope = float(slope)

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=np.float64)

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=np.float64), self.slope)

    def inverse(self, y):
        return np.asarray(y, dtype=np.float64) / self.slope

    def segments(self):
        return [(-math.inf, math.inf, self.slope, 0.0)]

    def __repr__(self):
        return f"LinearCell({self.slope!r})"


class PiecewiseLinearCell:
    """Linear interpolation through knots, extended linearly past both ends."""

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.slopes = np.diff(self.ys) / np.diff(self.xs)

    def _segment(self, x):
        return np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.slopes) - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        seg = self._segment(x)
        return self.ys[seg] + self.slopes[seg] * (x - self.xs[seg])

    def derivative(self, x):
        return self.slopes[self._segment(np.asarray(x, dtype=np.float64))]

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        seg = np.clip(np.searchsorted(self.ys, y, side="right") - 1, 0, len(self.slopes) - 1)
        return self.xs[seg] + (y - self.ys[seg]) / self.slopes[seg]

    def segments(self):
        out = []
        edges = [-math.inf, *self.xs[1:-1].tolist(), math.inf]
        for j, slope in enumerate(self.slopes):
            intercept = self.ys[j] - slope * self.xs[j]
            out.append((edges[j], edges[j + 1], float(slope), float(intercept)))
        return out


def _cell_factor(beta, sig):
    return math.prod(b for b, bit in zip(beta, sig) if bit == "1")


def _check_beta(beta):
    beta = tuple(float(b) for b in beta)
    if not beta:
        raise ValidationError("beta must have at least one entry")
    for b in beta:
        if not 0 < b <= 1:
            raise ValidationError(f"bias parameters must lie in (0, 1], got {b}")
    return beta


@dataclass(frozen=True)
class MultiplicativeBias:
    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_beta(self.beta))

    @property
    def p(self):
        return len(self.beta)

    def cell_factor(self, sig):
        return _cell_factor(self.beta, sig)

    def cell_function(self, sig):
        return LinearCell(self.cell_factor(sig))

    def validate(self):
        return self

    def to_dict(self):
        return {"kind": "multiplicative", "beta": list(self.beta)}


@dataclass(frozen=True)
class PowerOfProduct:
    """``b(x) = x * beta_sigma ** q`` with the bias vector carried by the model."""

    q: float

    kind = "power_of_product"

    def build(self, beta, sig):
        return LinearCell(_cell_factor(beta, sig) ** float(self.q))

    def validate(self):
        if not self.q >= 0:
            raise ValidationError("power_of_product exponent must be >= 0")

    def to_dict(self):
        return {"kind": self.kind, "q": self.q}


@dataclass(frozen=True)
class MonotonePiecewiseLinear:
    """Knots ``[(x0, y0), (x1, y1), ...]`` with increasing ``x`` and ``y``."""

    knots: tuple

    kind = "piecewise_linear"

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple((float(x), float(y)) for x, y in self.knots))

    def validate(self):
        if len(self.knots) < 2:
            raise ValidationError("piecewise-linear spec needs at least two knots")
        xs = np.array([k[0] for k in self.knots])
        ys = np.array([k[1] for k in self.knots])
        if np.any(np.diff(xs) <= 0):
            raise ValidationError("piecewise-linear knot positions must be strictly increasing")
        if np.any(np.diff(ys) < MIN_KNOT_RISE):
            raise ValidationError("piecewise-linear spec not strictly increasing")

    def build(self, beta, sig):
        xs, ys = zip(*self.knots)
        return PiecewiseLinearCell(xs, ys)

    def to_dict(self):
        return {"kind": self.kind, "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class GeneralBias:
    """Per-cell bias functions.

    Cells without an explicit spec use the multiplicative factor of
    ``beta`` (all ones when ``beta`` is omitted).
    """

    cells: dict = field(default_factory=dict)
    beta: tuple = None

    def __post_init__(self):
        if self.beta is not None:
            object.__setattr__(self, "beta", _check_beta(self.beta))

    def validate(self):
        for spec in self.cells.values():
            spec.validate()
        return self

    def cell_function(self, sig):
        beta = self.beta if self.beta is not None else (1.0,) * len(sig)
        spec = self.cells.get(sig)
        if spec is None:
            return LinearCell(_cell_factor(beta, sig))
        return spec.build(beta, sig)

    def to_dict(self):
        out = {"kind": "general", "cells": {s: c.to_dict() for s, c in self.cells.items()}}
        if self.beta is not None:
            out["beta"] = list(self.beta)
        return out


def observed_utilities(w, structure, bias):
    """Apply each item's cell bias function to its latent utility."""
    w = check_utilities(w, name="latent utilities")
    if w.size != structure.m:
        raise ValidationError(f"{w.size} utilities for m={structure.m} items")
    bias.validate()
    _check_bias_width(bias, structure.p)
    out = np.empty_like(w)
    for sig, items in structure.cells.items():
        idx = np.asarray(items)
        out[idx] = bias.cell_function(sig)(w[idx])
    return out


def _check_bias_width(bias, p):
    beta = getattr(bias, "beta", None)
    if beta is not None and len(beta) != p:
        raise ValidationError(f"bias has {len(beta)} parameters for p={p} groups")


def interaction_gap(bias, dist, problem):
    """``(b_00 - b_10 - b_01 + b_11)`` evaluated at ``F^-1(1 - n/m)``."""
    if problem.p != 2:
        raise ValidationError(f"interaction gap is defined for p = 2, got p={problem.p}")
    _check_bias_width(bias, 2)
    z = float(dist.quantile(1.0 - problem.n / problem.m))
    b = {s: float(bias.cell_function(s)(z)) for s in ("00", "10", "01", "11")}
    return b["00"] - b["10"] - b["01"] + b["11"]


@dataclass(frozen=True)
class Assumption2Report:
    passed: bool
    c: float
    d: float
    max_value: float
    max_derivative: float
    reasons: tuple = ()

    def __bool__(self):
        return self.passed


def min_derivative(bias, dist, signatures, points=10_001):
    grid = support_grid(dist, points)
    return min(float(np.min(bias.cell_function(s).derivative(grid))) for s in signatures)


def assumption2_check(bias, dist, signatures=None, points=10_001):
    """Grid check of ``b <= 1/c`` and ``d <= b' <= 1/c`` for every cell.

    A failure is reported in the return value, never raised.
    """
    if signatures is None:
        if getattr(bias, "beta", None) is not None:
            p = len(bias.beta)
        else:
            p = len(next(iter(getattr(bias, "cells", {})), "00"))
        signatures = [format(v, f"0{p}b") for v in range(2**p - 1, -1, -1)]
    reasons = []
    try:
        c = assumption2_c(dist, points).c
    except AssumptionViolation as exc:
        return Assumption2Report(False, 0.0, 0.0, math.nan, math.nan, (str(exc),))
    try:
        bias.validate()
    except ValidationError as exc:
        reasons.append(str(exc))
    grid = support_grid(dist, points)
    values, derivs = [], []
    for sig in signatures:
        fn = bias.cell_function(sig)
        vals = fn(grid)
        values.append(vals)
        derivs.append(fn.derivative(grid))
        if np.any(np.diff(vals) <= 0):
            reasons.append(f"b_{sig} is not strictly increasing on the support")
        if np.any(vals < 0):
            reasons.append(f"b_{sig} takes negative values on the support")
    vmax = max(float(v.max()) for v in values)
    dmin = min(float(d.min()) for d in derivs)
    dmax = max(float(d.max()) for d in derivs)
    slack = 1e-12
    if vmax > 1.0 / c + slack:
        reasons.append(f"max b = {vmax} exceeds 1/c = {1.0 / c}")
    if dmax > 1.0 / c + slack:
        reasons.append(f"max b' = {dmax} exceeds 1/c = {1.0 / c}")
    if dmin <= 0:
        reasons.append(f"min b' = {dmin} is not positive")
    return Assumption2Report(not reasons, c, dmin, vmax, dmax, tuple(reasons))


def from_dict(doc):
    kind = doc.get("kind")
    if kind == "multiplicative":
        return MultiplicativeBias(tuple(doc["beta"]))
    if kind == "general":
        cells = {}
        for sig, spec in doc.get("cells", {}).items():
            skind = spec.get("kind")
            if skind == "power_of_product":
                cells[sig] = PowerOfProduct(float(spec["q"]))
            elif skind == "piecewise_linear":
                cells[sig] = MonotonePiecewiseLinear(tuple(map(tuple, spec["knots"])))
            else:
                raise ValidationError(f"unknown cell bias kind {skind!r}")
        beta = doc.get("beta")
        return GeneralBias(cells, tuple(beta) if beta is not None else None)
    raise ValidationError(f"unknown bias kind {kind!r}")
