"""Group structures, selection instances and lower-bound constraint sets.

Signatures are bit-strings of length ``p``; character ``l`` is ``"1"`` when the
item belongs to group ``l + 1``.  For two groups the four cells are ``"11"``,
``"10"``, ``"01"`` and ``"00"``.  Item indices are 0-based throughout.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
import math

import numpy as np

from .exceptions import (
    InfeasibleConstraintsError,
    UnsupportedGroupCountError,
    ValidationError,
)
from .validation import check_count, check_memberships, check_open_unit

MAX_EXACT_GROUPS = 3


def all_signatures(p):
    """Every signature of length ``p`` from all-ones down to all-zeros."""
    return ["".join(bits) for bits in product("10", repeat=p)]


def _normalize_signature(sig, p):
    if isinstance(sig, str):
        s = sig.strip()
    else:
        s = "".join("1" if int(b) else "0" for b in sig)
    if len(s) != p or set(s) - {"0", "1"}:
        raise ValidationError(f"signature {sig!r} is not a {p}-bit string")
    return s


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Items, their group memberships and the induced partition into cells.

    Only non-empty cells are stored in ``cells``, ordered with the all-ones
    signature first.
    """

    membership: np.ndarray
    cells: Mapping[str, tuple]

    @property
    def m(self):
        return self.membership.shape[0]

    @property
    def p(self):
        return self.membership.shape[1]

    @property
    def signatures(self):
        return tuple(self.cells)

    def cell_size(self, sig):
        return len(self.cells.get(sig, ()))

    def cell_sizes(self):
        return {sig: len(items) for sig, items in self.cells.items()}

    def group_members(self, group):
        """Indices of items in group ``group`` (0-based group index)."""
        return np.flatnonzero(self.membership[:, group])

    def group_size(self, group):
        return int(self.membership[:, group].sum())

    def item_signatures(self):
        return ["".join("1" if b else "0" for b in row) for row in self.membership]

    def __eq__(self, other):
        if not isinstance(other, GroupStructure):
            return NotImplemented
        return np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash(self.membership.tobytes() + bytes(self.membership.shape))


def build_structure(m, memberships):
    """Group items by signature.

    ``memberships`` holds one signature per item, either as a bit-string
    (``"10"``) or as a sequence of 0/1 values.  Cells list their items in
    ascending index order.
    """
    m = check_count(m, name="m", low=1)
    if len(memberships) == 0:
        raise ValidationError("empty item list")
    if len(memberships) != m:
        raise ValidationError(f"got {len(memberships)} signatures for m={m} items")
    first = memberships[0]
    p = len(first.strip()) if isinstance(first, str) else len(first)
    if p == 0:
        raise ValidationError("p = 0: at least one group is required")
    sigs = [_normalize_signature(s, p) for s in memberships]
    matrix = np.array([[c == "1" for c in s] for s in sigs], dtype=bool)
    return structure_from_matrix(matrix)


def structure_from_matrix(X):
    """Build a :class:`GroupStructure` from an ``(m, p)`` 0/1 matrix."""
    matrix = check_memberships(X).copy()
    matrix.setflags(write=False)
    buckets = {}
    for i, row in enumerate(matrix):
        sig = "".join("1" if b else "0" for b in row)
        buckets.setdefault(sig, []).append(i)
    cells = {sig: tuple(buckets[sig]) for sig in sorted(buckets, reverse=True)}
    return GroupStructure(matrix, cells)


def structure_from_sizes(sizes, p=None):
    """Lay out cells of the given sizes, items assigned in ascending signature order."""
    if not sizes:
        raise ValidationError("no cells given")
    if p is None:
        p = len(next(iter(sizes)))
    norm = {}
    for sig, size in sizes.items():
        norm[_normalize_signature(sig, p)] = check_count(size, name=f"|I_{sig}|")
    rows = []
    for sig in sorted(norm):
        rows.extend([[c == "1" for c in sig]] * norm[sig])
    if not rows:
        raise ValidationError("empty item list")
    return structure_from_matrix(np.array(rows, dtype=bool))


@dataclass(frozen=True)
class SelectionProblem:
    structure: GroupStructure
    n: int

    def __post_init__(self):
        check_count(self.n, name="n", low=1, high=self.structure.m)

    @property
    def m(self):
        return self.structure.m

    @property
    def p(self):
        return self.structure.p

    @property
    def eta(self):
        return Fraction(self.n, self.m)

    @property
    def rho(self):
        return Fraction(min(len(c) for c in self.structure.cells.values()), self.m)


def make_balanced_problem(m, p, cell_fractions, n):
    """Instance with cell sizes ``m * fraction``; fractions must sum to one.

    ``cell_fractions=None`` gives all ``2**p`` cells the same size.
    """
    m = check_count(m, name="m", low=1)
    p = check_count(p, name="p", low=1)
    n = check_count(n, name="n", low=1, high=m)
    if cell_fractions is None:
        cell_fractions = {sig: Fraction(1, 2**p) for sig in all_signatures(p)}
    sizes = {}
    total = Fraction(0)
    for sig, frac in cell_fractions.items():
        fr = Fraction(frac) if isinstance(frac, (str, Fraction, int)) else Fraction(str(frac))
        total += fr
        exact = m * fr
        size = round(exact)
        if abs(float(exact) - size) > 1e-9 * max(m, 1):
            raise ValidationError(f"m * fraction for cell {sig} is {float(exact)}, not an integer")
        sizes[_normalize_signature(sig, p)] = int(size)
    if abs(float(total) - 1.0) > 1e-9:
        raise ValidationError(f"cell fractions sum to {float(total)}, not 1")
    if sum(sizes.values()) != m:
        raise ValidationError("cell sizes do not add up to m")
    return SelectionProblem(structure_from_sizes(sizes, p), n)


# -- constraints -------------------------------------------------------------


@dataclass(frozen=True)
class NonIntersectional:
    """Per-group lower bounds ``L_1 .. L_p``."""

    bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(check_count(b, name="L") for b in self.bounds))

    kind = "nonintersectional"

    def validate(self, problem):
        st = problem.structure
        if len(self.bounds) != st.p:
            raise ValidationError(f"{len(self.bounds)} bounds for p={st.p} groups")
        for ell, L in enumerate(self.bounds):
            if L > st.group_size(ell):
                raise InfeasibleConstraintsError(
                    f"L_{ell + 1}={L} exceeds |G_{ell + 1}|={st.group_size(ell)}"
                )
        return self


@dataclass(frozen=True)
class Intersectional:
    """Per-cell lower bounds ``L_sigma``; cells not listed have bound 0.

    ``capped`` records the cells whose designed bound was clipped to the cell
    size.
    """

    bounds: Mapping[str, int]
    capped: frozenset = field(default_factory=frozenset)

    kind = "intersectional"

    def __post_init__(self):
        clean = {str(s): check_count(v, name=f"L_{s}") for s, v in self.bounds.items()}
        object.__setattr__(self, "bounds", clean)
        object.__setattr__(self, "capped", frozenset(self.capped))

    def get(self, sig):
        return self.bounds.get(sig, 0)

    def total(self):
        return sum(self.bounds.values())

    def validate(self, problem):
        st = problem.structure
        for sig, L in self.bounds.items():
            _normalize_signature(sig, st.p)
            if L > st.cell_size(sig):
                raise InfeasibleConstraintsError(
                    f"L_{sig}={L} exceeds |I_{sig}|={st.cell_size(sig)}"
                )
        if self.total() > problem.n:
            raise InfeasibleConstraintsError(
                f"sum of cell bounds {self.total()} exceeds n={problem.n}"
            )
        return self


def no_constraints(problem):
    return Intersectional({})


def design_intersectional(problem, epsilon):
    """Cell lower bounds that do not depend on the bias or the distribution.

    ``L_sigma = floor(|I_sigma|/m * n * (1 - eps) + 2^-p * n * eps)``, capped at
    ``|I_sigma|``.  Arithmetic is exact (rationals), so bounds equal to an
    integer are never lost to rounding.
    """
    check_open_unit(epsilon, name="epsilon")
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    m, n, p = problem.m, problem.n, problem.p
    bounds, capped = {}, set()
    for sig, items in problem.structure.cells.items():
        size = len(items)
        raw = Fraction(size, m) * n * (1 - eps) + Fraction(n, 2**p) * eps
        L = math.floor(raw)
        if L > size:
            L = size
            capped.add(sig)
        bounds[sig] = L
    return Intersectional(bounds, frozenset(capped))


def proportional_nonintersectional(problem):
    """``L_l = floor(|G_l| * n / m)`` for every group."""
    st = problem.structure
    return NonIntersectional(
        tuple(st.group_size(ell) * problem.n // problem.m for ell in range(st.p))
    )


# -- feasibility --------------------------------------------------------------


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str = ""

    def __bool__(self):
        return self.feasible


def cell_roles(structure):
    """Split stored cells into shared (>= 2 groups), single-group and empty-signature ones.

    Returns ``(shared, singles, zero)`` where ``singles[l]`` is the signature of
    the cell holding items only in group ``l`` (``None`` if that cell is empty)
    and ``zero`` is the all-zeros signature or ``None``.
    """
    p = structure.p
    shared = [s for s in structure.cells if s.count("1") >= 2]
    singles = []
    for ell in range(p):
        sig = "".join("1" if j == ell else "0" for j in range(p))
        singles.append(sig if sig in structure.cells else None)
    zero = "0" * p if "0" * p in structure.cells else None
    return shared, singles, zero


def shared_count_grid(structure, n):
    """All count vectors for the shared cells with total at most ``n``.

    Rows follow lexicographic order over the shared cells as listed by
    :func:`cell_roles`.
    """
    shared, _, _ = cell_roles(structure)
    ranges = [range(min(structure.cell_size(s), n) + 1) for s in shared]
    if not shared:
        return shared, np.zeros((1, 0), dtype=np.int64)
    grid = np.array(list(product(*ranges)), dtype=np.int64)
    return shared, grid[grid.sum(axis=1) <= n]


def _require_small_p(structure):
    if structure.p > MAX_EXACT_GROUPS:
        raise UnsupportedGroupCountError(
            f"unsupported group count p={structure.p}: non-intersectional constraints "
            f"are handled exactly only for p <= {MAX_EXACT_GROUPS}"
        )


def nonintersectional_requirements(structure, bounds, n, grid=None):
    """Residual single-cell minima for each shared-cell count vector.

    ``bounds`` is one bound vector of length ``p`` or a stack of them with
    shape ``(G, p)``.  Returns ``(shared, grid, need, remaining, ok)``:
    ``need[..., e, l]`` is how many items the single cell of group ``l`` must
    still supply, ``remaining[e]`` the slots left after the shared cells, and
    ``ok[..., e]`` whether the row admits a feasible completion.
    """
    _require_small_p(structure)
    shared, sgrid = shared_count_grid(structure, n) if grid is None else grid
    _, singles, zero = cell_roles(structure)
    p = structure.p
    L = np.asarray(bounds, dtype=np.int64)
    covers = np.array([[s[ell] == "1" for ell in range(p)] for s in shared], dtype=np.int64)
    got = sgrid @ covers.reshape(len(shared), p)
    need = np.maximum(0, L[..., None, :] - got)
    remaining = n - sgrid.sum(axis=1)
    single_sizes = np.array([structure.cell_size(s) if s else 0 for s in singles])
    pool = int(single_sizes.sum()) + (structure.cell_size(zero) if zero else 0)
    ok = (
        np.all(need <= single_sizes, axis=-1)
        & (need.sum(axis=-1) <= remaining)
        & (remaining <= pool)
    )
    return shared, sgrid, need, remaining, ok


def check_feasibility(problem, constraints):
    """Decide whether some size-n selection meets ``constraints``."""
    st = problem.structure
    if isinstance(constraints, Intersectional):
        for sig, L in constraints.bounds.items():
            if L > st.cell_size(sig):
                return Feasibility(False, f"L_{sig}={L} exceeds |I_{sig}|={st.cell_size(sig)}")
        if constraints.total() > problem.n:
            return Feasibility(False, f"sum of L_sigma = {constraints.total()} exceeds n={problem.n}")
        return Feasibility(True)
    if isinstance(constraints, NonIntersectional):
        if len(constraints.bounds) != st.p:
            raise ValidationError(f"{len(constraints.bounds)} bounds for p={st.p} groups")
        for ell, L in enumerate(constraints.bounds):
            if L > st.group_size(ell):
                return Feasibility(
                    False, f"L_{ell + 1}={L} exceeds |G_{ell + 1}|={st.group_size(ell)}"
                )
        *_, ok = nonintersectional_requirements(st, constraints.bounds, problem.n)
        if ok.any():
            return Feasibility(True)
        return Feasibility(False, "no allocation of n items over the cells meets every group bound")
    raise ValidationError(f"unknown constraint type {type(constraints).__name__}")


def require_feasible(problem, constraints):
    verdict = check_feasibility(problem, constraints)
    if not verdict:
        raise InfeasibleConstraintsError(verdict.reason)
    return constraints


# -- serialization -----------------------------------------------------------


def structure_to_dict(structure, *, explicit=False):
    out = {"m": structure.m, "p": structure.p}
    if explicit:
        out["memberships"] = structure.item_signatures()
    else:
        out["cells"] = structure.cell_sizes()
    return out


def structure_from_dict(doc):
    if "memberships" in doc:
        sigs = list(doc["memberships"])
        return build_structure(doc.get("m", len(sigs)), sigs)
    if "cells" in doc:
        st = structure_from_sizes(dict(doc["cells"]), doc.get("p"))
        if "m" in doc and doc["m"] != st.m:
            raise ValidationError(f"cells add up to {st.m} items, not m={doc['m']}")
        return st
    if "cell_fractions" in doc:
        return make_balanced_problem(doc["m"], doc["p"], doc["cell_fractions"], 1).structure
    raise ValidationError("structure needs one of 'cells', 'cell_fractions' or 'memberships'")


def constraints_to_dict(constraints):
    if isinstance(constraints, NonIntersectional):
        return {"kind": "nonintersectional", "bounds": list(constraints.bounds)}
    out = {"kind": "intersectional", "bounds": dict(constraints.bounds)}
    if constraints.capped:
        out["capped"] = sorted(constraints.capped, reverse=True)
    return out


def constraints_from_dict(doc):
    kind = doc.get("kind")
    if kind == "nonintersectional":
        return NonIntersectional(tuple(doc["bounds"]))
    if kind == "intersectional":
        return Intersectional(dict(doc["bounds"]), frozenset(doc.get("capped", ())))
    raise ValidationError(f"unknown constraint kind {kind!r}")


def problem_to_dict(problem, constraints=None, *, explicit=False):
    out = structure_to_dict(problem.structure, explicit=explicit)
    out["n"] = problem.n
    if constraints is not None:
        out["constraints"] = constraints_to_dict(constraints)
    return out


def problem_from_dict(doc):
    """Inverse of :func:`problem_to_dict`; returns ``(problem, constraints or None)``."""
    structure = structure_from_dict(doc)
    problem = SelectionProblem(structure, check_count(doc.get("n"), name="n", low=1, high=structure.m))
    cons = doc.get("constraints")
    return problem, (constraints_from_dict(cons) if cons is not None else None)

