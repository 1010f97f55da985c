"""Exact size-n selection with and without lower-bound constraints.

Ties are broken towards the lower item index everywhere, so every solver is a
deterministic function of its inputs.  Each solver picks, inside every cell,
a prefix of the cell's items ordered by decreasing observed utility.
"""

from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np

from .core import (
    Intersectional,
    NonIntersectional,
    SelectionProblem,
    cell_roles,
    nonintersectional_requirements,
    require_feasible,
    shared_count_grid,
)
from .exceptions import (
    EnumerationTooLargeError,
    InfeasibleConstraintsError,
    ValidationError,
    ZeroUtilityError,
)
from .validation import check_count, check_utilities

ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class Selection:
    chosen: tuple
    counts: dict
    latent_total: float
    observed_total: float

    def mask(self, m):
        x = np.zeros(m, dtype=bool)
        x[list(self.chosen)] = True
        return x

    def to_record(self):
        return {
            "chosen": list(self.chosen),
            "counts": dict(self.counts),
            "latent_total": self.latent_total,
            "observed_total": self.observed_total,
        }


def descending_order(values):
    """Indices sorted by decreasing value, ties by increasing index."""
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


def _finish(idx, observed, latent, structure):
    idx = np.sort(np.asarray(idx, dtype=np.int64))
    counts = {}
    if structure is not None:
        member = np.zeros(structure.m, dtype=bool)
        member[idx] = True
        counts = {sig: int(member[list(items)].sum()) for sig, items in structure.cells.items()}
    lat = math.fsum(latent[idx]) if latent is not None else None
    return Selection(tuple(int(i) for i in idx), counts, lat, math.fsum(observed[idx]))


def _prepare(values, n, latent, structure):
    values = check_utilities(values, name="utilities", nonnegative=False)
    n = check_count(n, name="n", low=1, high=values.size)
    if latent is not None:
        latent = check_utilities(latent, name="latent utilities")
        if latent.size != values.size:
            raise ValidationError("latent and observed utilities differ in length")
    if structure is not None and structure.m != values.size:
        raise ValidationError(f"{values.size} utilities for m={structure.m} items")
    return values, n, latent


def select_unconstrained(w, n, structure=None):
    """The latent-optimal selection: the ``n`` largest latent utilities."""
    w, n, _ = _prepare(w, n, None, structure)
    return _finish(descending_order(w)[:n], w, w, structure)


def select_biased(w_hat, n, structure=None, latent=None):
    """The ``n`` largest observed utilities; ``latent`` (if given) fills ``latent_total``."""
    w_hat, n, latent = _prepare(w_hat, n, latent, structure)
    return _finish(descending_order(w_hat)[:n], w_hat, latent, structure)


def select_constrained_intersectional(w_hat, structure, constraints, n, latent=None):
    """Best observed utility subject to per-cell lower bounds.

    Takes the top ``L_sigma`` items of every cell, then fills the remaining
    slots with the best leftover items overall.  ``O(m log m)``.
    """
    w_hat, n, latent = _prepare(w_hat, n, latent, structure)
    require_feasible(SelectionProblem(structure, n), constraints)
    order = descending_order(w_hat)
    forced = np.zeros(structure.m, dtype=bool)
    for sig, items in structure.cells.items():
        L = constraints.get(sig)
        if L:
            cell = np.asarray(items)
            forced[cell[descending_order(w_hat[cell])[:L]]] = True
    free = order[~forced[order]][: n - int(forced.sum())]
    return _finish(np.concatenate([np.flatnonzero(forced), free]), w_hat, latent, structure)


class NonIntersectionalSolver:
    """Exact optimiser over group lower bounds for one draw of utilities (p <= 3).

    The counts taken from cells shared by two or more groups are enumerated.
    Once they are fixed, each group's remaining requirement falls on its
    single-group cell, and the best completion takes those minima and fills
    the rest greedily.  Filling greedily means taking the shortest prefix of
    the merged (single-group + no-group) order whose union with the forced
    items reaches the slot count.  The enumeration and that prefix search are
    vectorised over many bound vectors at once, which is what makes sweeps
    over ``(L1, L2)`` grids cheap.
    """

    def __init__(self, structure, w_hat, n, latent=None):
        self.structure = structure
        self.n = n
        self.w_hat = w_hat
        self.latent = latent
        self.shared, self.singles, self.zero = cell_roles(structure)
        self.grid = shared_count_grid(structure, n)
        self.cell_order = {}
        self.prefix = {}
        self.latent_prefix = {}
        for sig, items in structure.cells.items():
            cell = np.asarray(items)
            ordered = cell[descending_order(w_hat[cell])]
            self.cell_order[sig] = ordered
            self.prefix[sig] = np.concatenate([[0.0], np.cumsum(w_hat[ordered])])
            if latent is not None:
                self.latent_prefix[sig] = np.concatenate([[0.0], np.cumsum(latent[ordered])])
        pool_sigs = [s for s in self.singles if s] + ([self.zero] if self.zero else [])
        pool = np.concatenate([np.asarray(structure.cells[s]) for s in pool_sigs]) if pool_sigs else np.zeros(0, int)
        merged = pool[descending_order(w_hat[pool])] if pool.size else pool
        label = np.full(structure.m, -1)
        for ell, s in enumerate(self.singles):
            if s:
                label[np.asarray(structure.cells[s])] = ell
        tags = label[merged]
        p = structure.p
        onehot = np.zeros((merged.size + 1, p + 1), dtype=np.int64)
        for ell in range(p):
            onehot[1:, ell] = np.cumsum(tags == ell)
        onehot[1:, p] = np.cumsum(tags == -1)
        self.merged_counts = onehot
        self.merged_size = merged.size

    def allocate(self, bounds):
        """Best cell counts for each row of ``bounds`` (shape ``(G, p)``).

        Returns ``(counts, observed, latent, ok)`` where ``counts`` maps every
        stored signature to an int array of length ``G``.
        """
        bounds = np.atleast_2d(np.asarray(bounds, dtype=np.int64))
        st, p = self.structure, self.structure.p
        G = bounds.shape[0]
        shared, sgrid = self.grid
        E = sgrid.shape[0]
        if bounds.shape[1] != p:
            raise ValidationError(f"{bounds.shape[1]} bounds for p={p} groups")
        _, _, need, _, ok = nonintersectional_requirements(st, bounds, self.n, self.grid)
        remaining = np.broadcast_to(self.n - sgrid.sum(axis=1), (G, E))
        C = self.merged_counts

        def union_size(j):
            got = C[j]  # (G, E, p + 1)
            return np.maximum(need, got[..., :p]).sum(axis=-1) + got[..., p]

        lo = np.zeros((G, E), dtype=np.int64)
        hi = np.full((G, E), self.merged_size, dtype=np.int64)
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            reach = union_size(mid) >= remaining
            active = lo < hi
            hi = np.where(active & reach, mid, hi)
            lo = np.where(active & ~reach, mid + 1, lo)
        got = C[lo]
        single_k = np.maximum(need, got[..., :p])
        zero_k = got[..., p]

        alloc = {}
        for a, sig in enumerate(shared):
            alloc[sig] = np.broadcast_to(sgrid[:, a], (G, E))
        for ell, sig in enumerate(self.singles):
            if sig:
                alloc[sig] = single_k[..., ell]
        if self.zero:
            alloc[self.zero] = zero_k

        def total(prefix):
            val = np.zeros((G, E))
            for sig, k in alloc.items():
                val = val + prefix[sig][np.minimum(k, st.cell_size(sig))]
            return val

        value = np.where(ok, total(self.prefix), -np.inf)
        best = np.argmax(value, axis=1)
        rows = np.arange(G)
        feasible = ok[rows, best]
        counts = {sig: np.asarray(k[rows, best]) for sig, k in alloc.items()}
        observed = value[rows, best]
        latent = total(self.latent_prefix)[rows, best] if self.latent is not None else None
        return counts, observed, latent, feasible

    def chosen(self, counts, row=0):
        parts = [self.cell_order[sig][: int(k[row])] for sig, k in counts.items()]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def select_constrained_nonintersectional(w_hat, structure, constraints, n, latent=None):
    """Best observed utility subject to per-group lower bounds (``p <= 3``)."""
    w_hat, n, latent = _prepare(w_hat, n, latent, structure)
    if len(constraints.bounds) != structure.p:
        raise ValidationError(f"{len(constraints.bounds)} bounds for p={structure.p} groups")
    require_feasible(SelectionProblem(structure, n), constraints)
    solver = NonIntersectionalSolver(structure, w_hat, n, latent)
    counts, _, _, ok = solver.allocate([constraints.bounds])
    if not ok[0]:
        raise InfeasibleConstraintsError("no allocation of n items over the cells meets every group bound")
    return _finish(solver.chosen(counts), w_hat, latent, structure)


def select_constrained(w_hat, structure, constraints, n, latent=None):
    """Dispatch on the constraint type; ``None`` means unconstrained."""
    if constraints is None:
        return select_biased(w_hat, n, structure, latent)
    if isinstance(constraints, Intersectional):
        return select_constrained_intersectional(w_hat, structure, constraints, n, latent)
    if isinstance(constraints, NonIntersectional):
        return select_constrained_nonintersectional(w_hat, structure, constraints, n, latent)
    raise ValidationError(f"unknown constraint type {type(constraints).__name__}")


def brute_force_select(w_hat, structure, constraints, n, latent=None):
    """Enumerate every size-n subset; ties go to the lexicographically first."""
    w_hat, n, latent = _prepare(w_hat, n, latent, structure)
    m = structure.m
    if math.comb(m, n) > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(f"C({m}, {n}) = {math.comb(m, n)} subsets exceeds {ENUMERATION_LIMIT}")
    subsets = np.array(list(combinations(range(m), n)), dtype=np.int64)
    keep = np.ones(len(subsets), dtype=bool)
    if isinstance(constraints, NonIntersectional):
        got = structure.membership[subsets].sum(axis=1)
        keep &= np.all(got >= np.asarray(constraints.bounds)[None, :], axis=1)
    elif isinstance(constraints, Intersectional):
        for sig, L in constraints.bounds.items():
            inside = np.zeros(m, dtype=bool)
            inside[list(structure.cells.get(sig, ()))] = True
            keep &= inside[subsets].sum(axis=1) >= L
    elif constraints is not None:
        raise ValidationError(f"unknown constraint type {type(constraints).__name__}")
    if not keep.any():
        raise InfeasibleConstraintsError("no feasible subset")
    value = np.where(keep, w_hat[subsets].sum(axis=1), -np.inf)
    return _finish(subsets[int(np.argmax(value))], w_hat, latent, structure)


def utility_ratio_single(w, sel_tilde, sel_star):
    """Latent utility of ``sel_tilde`` as a fraction of that of ``sel_star``."""
    w = check_utilities(w, name="latent utilities")
    num = sel_tilde.latent_total if sel_tilde.latent_total is not None else math.fsum(w[list(sel_tilde.chosen)])
    den = sel_star.latent_total if sel_star.latent_total is not None else math.fsum(w[list(sel_star.chosen)])
    if not den > 0:
        raise ZeroUtilityError("optimal selection has zero latent utility")
    return num / den
