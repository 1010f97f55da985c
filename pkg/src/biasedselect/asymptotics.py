"""Continuous (m -> infinity) selection programs for two groups.

In the large-market limit a constrained selection is described by how many
items ``k_sigma`` it takes from each of the four cells.  Inside a cell the
top ``k`` of ``|I|`` utilities occupy the upper ``k/|I|`` quantile, so the
total observed utility is separable and concave in ``k``:

    f_b(k) = sum_sigma |I_sigma| * integral_{F^-1(1 - k/|I|)}^{hi} b_sigma(x) dmu(x)

Program 1 maximises latent utility subject to ``sum k = n``; Program 2
maximises observed utility subject additionally to the two group lower
bounds.  The limit utility ratio is the latent utility of the Program-2
optimum divided by the Program-1 optimum.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import nnls

from .bias import LinearCell
from .core import GroupStructure
from .exceptions import InfeasibleConstraintsError, ValidationError
from .numerics import adaptive_simpson, bisect_increasing

SIGNATURES = ("11", "10", "01", "00")
IN_G1 = np.array([1.0, 1.0, 0.0, 0.0])
IN_G2 = np.array([1.0, 0.0, 1.0, 0.0])
CASES = ("free", "group1", "group2", "both")
_IDENTITY = LinearCell(1.0)
# bias slopes down to ~1e-12 still resolve counts to ~1e-12 * |I|
LEVEL_ATOL = 1e-24


@dataclass(frozen=True)
class AllocationVector:
    """Continuous per-cell counts; ``case`` names the active group bounds."""

    k: dict
    case: str = ""

    def as_array(self):
        return np.array([self.k.get(s, 0.0) for s in SIGNATURES])

    @property
    def total(self):
        return math.fsum(self.k.values())


@dataclass(frozen=True)
class BoundReport:
    value: float
    inputs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MaxRatioResult:
    L1: float
    L2: float
    ratio: float
    grid_L1: float
    grid_L2: float
    grid_ratio: float


# -- inputs -------------------------------------------------------------------


def cell_size_vector(sizes):
    """Sizes in the order 11, 10, 01, 00 from a dict or a two-group structure."""
    if isinstance(sizes, GroupStructure):
        if sizes.p != 2:
            raise ValidationError(f"continuous programs need p = 2, got p={sizes.p}")
        sizes = sizes.cell_sizes()
    if isinstance(sizes, dict):
        for sig in sizes:
            if sig not in SIGNATURES:
                raise ValidationError(f"unknown two-group signature {sig!r}")
        s = np.array([float(sizes.get(sig, 0.0)) for sig in SIGNATURES])
    else:
        s = np.asarray(sizes, dtype=np.float64).reshape(-1)
        if s.size != 4:
            raise ValidationError("need four cell sizes ordered 11, 10, 01, 00")
    if np.any(~np.isfinite(s)) or np.any(s < 0) or s.sum() <= 0:
        raise ValidationError("cell sizes must be finite, non-negative and not all zero")
    return s


def _allocation_array(k):
    if isinstance(k, AllocationVector):
        return k.as_array()
    if isinstance(k, dict):
        return np.array([float(k.get(s, 0.0)) for s in SIGNATURES])
    return np.asarray(k, dtype=np.float64)


def _cell_functions(weights):
    if hasattr(weights, "cell_function"):
        return [weights.cell_function(s) for s in SIGNATURES]
    if isinstance(weights, dict):
        weights = [weights.get(s, 1.0) for s in SIGNATURES]
    gamma = [float(g) for g in weights]
    if len(gamma) != 4:
        raise ValidationError("need four cell weights ordered 11, 10, 01, 00")
    return [LinearCell(g) for g in gamma]


# -- per-cell integrals -------------------------------------------------------


def _upper_integral(fn, dist, z):
    """``integral_z^hi fn(x) dmu(x)`` for a piecewise-linear ``fn``, vectorised in ``z``."""
    z = np.clip(np.asarray(z, dtype=np.float64), dist.lo, dist.hi)
    total = np.zeros_like(z)
    for a, b, slope, intercept in fn.segments():
        a = np.maximum(z, max(a, dist.lo))
        b = min(b, dist.hi)
        a = np.minimum(a, b)
        part = slope * (dist.partial_expectation(a) - dist.partial_expectation(b))
        if intercept:
            part = part + intercept * (dist.cdf(b) - dist.cdf(a))
        total = total + part
    return total


def _threshold(dist, size, k):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(size > 0, 1.0 - k / np.where(size > 0, size, 1.0), 1.0)
    return dist.quantile(np.clip(q, 0.0, 1.0))


def _check_box(s, k, tol=1e-9):
    slack = tol * max(1.0, float(s.max()))
    if np.any(k < -slack) or np.any(k > s + slack):
        raise ValidationError("allocation outside 0 <= k_sigma <= |I_sigma|")


def f_value(weights, dist, sizes, k, *, method="closed"):
    """Observed utility of allocation ``k`` under per-cell weights.

    ``weights`` is either four multiplicative weights (ordered 11, 10, 01, 00,
    or a dict) or a bias model.  ``method="quadrature"`` integrates with
    adaptive Simpson (absolute tolerance 1e-9) instead of the closed form.
    """
    s = cell_size_vector(sizes)
    k = _allocation_array(k)
    _check_box(s, k)
    k = np.clip(k, 0.0, s)
    fns = _cell_functions(weights)
    terms = []
    for j, fn in enumerate(fns):
        if s[j] == 0 or k[j] == 0:
            continue
        z = float(_threshold(dist, s[j], k[j]))
        if method == "closed":
            val = float(_upper_integral(fn, dist, z))
        elif method == "quadrature":
            val = adaptive_simpson(lambda x: float(fn(x)) * float(dist.pdf(x)), z, dist.hi, tol=1e-9)
        else:
            raise ValidationError(f"unknown integration method {method!r}")
        terms.append(s[j] * val)
    return math.fsum(terms)


def gradient(weights, dist, sizes, k):
    """``d f / d k_sigma = b_sigma(F^-1(1 - k_sigma/|I_sigma|))``; 0 for empty cells."""
    s = cell_size_vector(sizes)
    k = np.clip(_allocation_array(k), 0.0, s)
    fns = _cell_functions(weights)
    return np.array([float(fn(_threshold(dist, s[j], k[j]))) if s[j] > 0 else 0.0 for j, fn in enumerate(fns)])


def solve_program1(dist, sizes, n):
    """Latent optimum: the proportional allocation ``|I_sigma| * n / m``."""
    s = cell_size_vector(sizes)
    m = s.sum()
    if not 0 <= n <= m:
        raise ValidationError(f"need 0 <= n <= m, got n={n}, m={m}")
    return AllocationVector({sig: float(v) for sig, v in zip(SIGNATURES, s * n / m)}, "free")


# -- Program 2 ----------------------------------------------------------------


def relaxation_feasible(sizes, n, L1, L2, tol=1e-9):
    """Whether some real ``k`` in the box with ``sum k = n`` meets both group bounds."""
    s = cell_size_vector(sizes)
    L1, L2 = np.asarray(L1, dtype=np.float64), np.asarray(L2, dtype=np.float64)
    slack = tol * max(1.0, n)
    tmin = np.maximum.reduce([np.zeros_like(L1 + L2), L1 - s[1], L2 - s[2]])
    t = np.clip(np.minimum(L1, L2), tmin, s[0])
    needed = t + np.maximum(0.0, L1 - t) + np.maximum(0.0, L2 - t)
    return (L1 >= -slack) & (L2 >= -slack) & (tmin <= s[0] + slack) & (needed <= n + slack) & (n <= s.sum() + slack)


class _Program:
    """Batched Program-2 solver for fixed bias, distribution, sizes and ``n``."""

    def __init__(self, bias, dist, sizes, n):
        self.s = cell_size_vector(sizes)
        self.n = float(n)
        if not 0 <= self.n <= self.s.sum():
            raise ValidationError(f"need 0 <= n <= m, got n={n}, m={self.s.sum()}")
        self.dist = dist
        self.fns = _cell_functions(bias)
        self.tol = 1e-9 * max(1.0, self.n)
        lows = [float(fn(dist.lo)) for fn in self.fns]
        highs = [float(fn(dist.hi)) for fn in self.fns]
        span = max(highs) - min(lows)
        self.level_lo = min(lows) - span - 1.0
        self.level_hi = max(highs) + span + 1.0

    # cell-level maps, vectorised over the trailing batch axis
    def grad(self, j, k):
        if self.s[j] == 0:
            return np.zeros_like(np.asarray(k, dtype=np.float64))
        k = np.clip(k, 0.0, self.s[j])
        return self.fns[j](_threshold(self.dist, self.s[j], k))

    def count_at_level(self, j, level):
        if self.s[j] == 0:
            return np.zeros_like(level)
        x = self.fns[j].inverse(level)
        return self.s[j] * (1.0 - self.dist.cdf(x))

    def value(self, K, fns=None):
        fns = self.fns if fns is None else fns
        total = np.zeros(K.shape[0])
        for j, fn in enumerate(fns):
            if self.s[j] > 0:
                total = total + self.s[j] * _upper_integral(fn, self.dist, _threshold(self.dist, self.s[j], K[:, j]))
        return total

    def waterfill(self, cells, T):
        """Optimal split of totals ``T`` over ``cells`` with only box constraints."""
        T = np.asarray(T, dtype=np.float64)

        def neg_total(level):
            return -sum(self.count_at_level(j, level) for j in cells)

        level = bisect_increasing(neg_total, -T, self.level_lo, self.level_hi, xtol=0.0, atol=LEVEL_ATOL)
        out = np.zeros(T.shape + (4,))
        for j in cells:
            out[..., j] = np.clip(self.count_at_level(j, level), 0.0, self.s[j])
        return out

    def solve(self, L1, L2):
        """Optimal allocations ``(G, 4)``, case index per row and a feasibility mask."""
        L1 = np.atleast_1d(np.asarray(L1, dtype=np.float64))
        L2 = np.atleast_1d(np.asarray(L2, dtype=np.float64))
        L1, L2 = np.broadcast_arrays(L1, L2)
        G, s, n, tol = L1.size, self.s, self.n, self.tol
        L1, L2 = L1.reshape(-1), L2.reshape(-1)
        feasible = relaxation_feasible(s, n, L1, L2)
        cands = np.zeros((4, G, 4))
        valid = np.zeros((4, G), dtype=bool)

        free = self.waterfill([0, 1, 2, 3], np.array(n))
        cands[0] = free
        valid[0] = (free @ IN_G1 >= L1 - tol) & (free @ IN_G2 >= L2 - tol)

        for c, (inside, outside, L, other, cover) in enumerate(
            [([0, 1], [2, 3], L1, L2, IN_G2), ([0, 2], [1, 3], L2, L1, IN_G1)], start=1
        ):
            ok = (L >= -tol) & (L <= s[inside].sum() + tol) & (n - L >= -tol) & (n - L <= s[outside].sum() + tol)
            Lc = np.clip(L, 0.0, min(n, s[inside].sum()))
            K = self.waterfill(inside, Lc) + self.waterfill(outside, n - Lc)
            cands[c] = K
            valid[c] = ok & (K @ cover >= other - tol)

        tlo = np.maximum.reduce([np.zeros(G), L1 - s[1], L2 - s[2], L1 + L2 - n])
        thi = np.minimum.reduce([np.full(G, s[0]), L1, L2, L1 + L2 - n + s[3]])
        ok = tlo <= thi + tol
        thi_c = np.maximum(thi, tlo)

        def neg_slope(t):
            return -(
                self.grad(0, t) - self.grad(1, L1 - t) - self.grad(2, L2 - t) + self.grad(3, n - L1 - L2 + t)
            )

        t = bisect_increasing(neg_slope, np.zeros(G), tlo, thi_c, xtol=0.0, atol=1e-15 * max(1.0, n))
        K = np.stack([t, L1 - t, L2 - t, n - L1 - L2 + t], axis=1)
        cands[3] = np.clip(K, 0.0, s)
        valid[3] = ok

        valid &= feasible[None, :]
        score = np.full((4, G), -np.inf)
        for c in range(4):
            if valid[c].any():
                score[c, valid[c]] = self.value(cands[c][valid[c]])
        case = np.argmax(score, axis=0)
        best = cands[case, np.arange(G)]
        return best, case, feasible & valid.any(axis=0)

    def latent_value(self, K):
        return self.value(K, [_IDENTITY] * 4)


def solve_program2(bias, dist, sizes, n, L1, L2):
    """Observed-utility optimum subject to ``k_10 + k_11 >= L1`` and ``k_01 + k_11 >= L2``.

    The objective is separable and strictly concave, so the optimum is the
    best of four candidates, one per set of active group bounds: no bound
    (water-filling on a common marginal level), one bound (two independent
    water-filling blocks) or both (a one-dimensional root search on ``k_11``).
    """
    prog = _Program(bias, dist, sizes, n)
    K, case, ok = prog.solve(L1, L2)
    if not ok[0]:
        raise InfeasibleConstraintsError(f"group bounds ({L1}, {L2}) are infeasible for n={n}")
    return AllocationVector({sig: float(v) for sig, v in zip(SIGNATURES, K[0])}, CASES[case[0]])


def kkt_residual(bias, dist, sizes, n, L1, L2, k, active_tol=1e-7):
    """Largest violation of the optimality conditions at ``k``.

    Multipliers are fitted by non-negative least squares, with a bound's
    multiplier allowed only when the bound is (nearly) tight.  The result is
    the larger of the stationarity residual and the primal infeasibility.
    """
    s = cell_size_vector(sizes)
    k = _allocation_array(k)
    keep = s > 0
    g = gradient(bias, dist, s, k)
    scale = active_tol * max(1.0, n)
    cols = [-np.ones(4), np.ones(4)]
    if k @ IN_G1 - L1 <= scale:
        cols.append(IN_G1)
    if k @ IN_G2 - L2 <= scale:
        cols.append(IN_G2)
    for j in range(4):
        if keep[j] and k[j] <= scale:
            cols.append(np.eye(4)[j])
        if keep[j] and k[j] >= s[j] - scale:
            cols.append(-np.eye(4)[j])
    A = np.stack(cols, axis=1)[keep]
    _, stationarity = nnls(A, -g[keep])
    primal = max(
        abs(math.fsum(k) - n),
        max(0.0, L1 - k @ IN_G1),
        max(0.0, L2 - k @ IN_G2),
        float(np.max(np.maximum(0.0, -k))),
        float(np.max(np.maximum(0.0, k - s))),
    )
    return max(float(stationarity), primal)


def limit_utility_ratio(bias, dist, sizes, n, L1, L2):
    """Large-market utility ratio of observed-optimal selection under group bounds."""
    prog = _Program(bias, dist, sizes, n)
    K, _, ok = prog.solve(L1, L2)
    if not ok[0]:
        raise InfeasibleConstraintsError(f"group bounds ({L1}, {L2}) are infeasible for n={n}")
    return float(prog.latent_value(K)[0] / _optimal_latent(prog))


def _optimal_latent(prog):
    star = (prog.s * prog.n / prog.s.sum())[None, :]
    return float(prog.latent_value(star)[0])


def _golden_max(fun, a, b, iters=60):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a <= 1e-12 * max(1.0, abs(a), abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def ratio_landscape(bias, dist, sizes, n, L1_values, L2_values):
    """Limit ratio on the grid ``L1_values x L2_values`` (NaN where infeasible)."""
    prog = _Program(bias, dist, sizes, n)
    A, B = np.meshgrid(np.asarray(L1_values, float), np.asarray(L2_values, float), indexing="ij")
    K, _, ok = prog.solve(A.ravel(), B.ravel())
    ratio = np.full(A.size, np.nan)
    if ok.any():
        ratio[ok] = prog.latent_value(K[ok]) / _optimal_latent(prog)
    return ratio.reshape(A.shape)


def max_limit_ratio(bias, dist, sizes, n, resolution=200, refine=True):
    """Best limit ratio over group bounds on a ``resolution x resolution`` grid.

    The grid spans ``[0, |G1|] x [0, |G2|]``; ties go to the lexicographically
    smallest ``(L1, L2)``.  A golden-section pass along each coordinate then
    polishes the grid maximum inside its neighbouring grid cells.
    """
    resolution = int(resolution)
    if resolution < 2:
        raise ValidationError("grid resolution must be at least 2")
    s = cell_size_vector(sizes)
    g1, g2 = s @ IN_G1, s @ IN_G2
    xs, ys = np.linspace(0.0, g1, resolution), np.linspace(0.0, g2, resolution)
    land = ratio_landscape(bias, dist, s, n, xs, ys)
    flat = np.where(np.isnan(land), -np.inf, land).ravel()
    idx = int(np.argmax(flat))
    i, j = divmod(idx, resolution)
    best = (float(xs[i]), float(ys[j]), float(flat[idx]))
    grid_best = best
    if refine:
        prog = _Program(bias, dist, s, n)
        denom = _optimal_latent(prog)

        def ratio_at(a, b):
            K, _, ok = prog.solve(a, b)
            return float(prog.latent_value(K)[0] / denom) if ok[0] else -np.inf

        L1, L2, val = best
        x, fx = _golden_max(lambda a: ratio_at(a, L2), float(xs[max(i - 1, 0)]), float(xs[min(i + 1, resolution - 1)]))
        if fx > val:
            L1, val = x, fx
        y, fy = _golden_max(lambda b: ratio_at(L1, b), float(ys[max(j - 1, 0)]), float(ys[min(j + 1, resolution - 1)]))
        if fy > val:
            L2, val = y, fy
        best = (L1, L2, val)
    return MaxRatioResult(best[0], best[1], best[2], *grid_best)


# -- closed-form bounds -------------------------------------------------------


def _check_eta(eta):
    if not 0 < eta < 1:
        raise ValidationError(f"eta must lie in (0, 1), got {eta}")


def thm1_bound(rho, eta, beta):
    """Upper bound on the ratio under any group bounds: uniform, multiplicative bias."""
    _check_eta(eta)
    if not rho > 0:
        raise ValidationError("rho must be positive")
    b1, b2 = (float(b) for b in beta)
    gap = rho / 3.0 * min(eta, 1.0 - eta) * (1.0 - b1) * (1.0 - b2)
    return BoundReport(1.0 - gap * gap, {"rho": rho, "eta": eta, "beta": (b1, b2)})


def thm3_bound(c, rho, eta, delta_b):
    """Upper bound for general bias in terms of the interaction gap."""
    _check_eta(eta)
    if not 0 < c <= 1:
        raise ValidationError(f"c must lie in (0, 1], got {c}")
    if not rho > 0:
        raise ValidationError("rho must be positive")
    term = c**4 * rho * min(eta, 1.0 - eta) * delta_b
    return BoundReport(1.0 - term * term, {"c": c, "rho": rho, "eta": eta, "delta_b": delta_b})


def prop89_bound(beta):
    """``8/9 + 1.5 * max(beta)`` for balanced uniform instances, capped at 1."""
    b = tuple(float(x) for x in beta)
    return BoundReport(min(1.0, 8.0 / 9.0 + 1.5 * max(b)), {"beta": b})
