"""Seeded Monte Carlo estimates of the utility ratio, plus analytic validators.

Trial ``t`` always draws from its own generator, seeded by ``(seed, t)``
through :class:`numpy.random.SeedSequence`, so an estimate does not depend on
how trials are scheduled across worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os

import numpy as np

from .bias import observed_utilities
from .core import nonintersectional_requirements, require_feasible
from .exceptions import ValidationError, ZeroUtilityError
from .selection import NonIntersectionalSolver, select_constrained
from .validation import check_count

THREADS_ENV = "BIASEDSELECT_THREADS"
Z_LIMIT = 4.0
BLOCK = 10_000


def default_workers():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def trial_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(t),)))


def _map_trials(fn, trials, workers):
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or trials == 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


@dataclass(frozen=True)
class RatioEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int
    per_trial_ratios: tuple = None

    @classmethod
    def from_ratios(cls, ratios, seed, keep=False):
        r = np.asarray(ratios, dtype=np.float64)
        stderr = float(np.std(r, ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0
        return cls(math.fsum(r) / r.size, stderr, int(r.size), int(seed), tuple(r.tolist()) if keep else None)

    def to_record(self):
        return {"mean": self.mean, "stderr": self.stderr, "trials": self.trials, "seed": self.seed}


def _optimal_latent(w, n):
    top = np.argpartition(-w, n - 1)[:n] if n < w.size else np.arange(w.size)
    total = math.fsum(w[top])
    if not total > 0:
        raise ZeroUtilityError("optimal selection has zero latent utility")
    return total


def estimate_utility_ratio(problem, dist, bias, constraints=None, trials=1000, seed=0, *, workers=None, keep=False):
    """Mean over trials of latent utility(biased constrained) / latent utility(optimal)."""
    trials = check_count(trials, name="trials", low=1)
    st, n = problem.structure, problem.n
    if constraints is not None:
        require_feasible(problem, constraints)

    def one(t):
        w = dist.sample(trial_rng(seed, t), st.m)
        w_hat = observed_utilities(w, st, bias)
        sel = select_constrained(w_hat, st, constraints, n, latent=w)
        return sel.latent_total / _optimal_latent(w, n)

    return RatioEstimate.from_ratios(_map_trials(one, trials, workers), seed, keep)


@dataclass(frozen=True)
class SweepResult:
    bounds: np.ndarray
    feasible: np.ndarray
    estimates: tuple
    best: int

    @property
    def argmax(self):
        return tuple(int(v) for v in self.bounds[self.best]), self.estimates[self.best]

    def rows(self):
        for b, ok, est in zip(self.bounds, self.feasible, self.estimates):
            yield tuple(int(v) for v in b), bool(ok), est


def sweep_nonintersectional(problem, dist, bias, L1_grid, L2_grid, trials=200, seed=0, *, L3_grid=None, workers=None):
    """Ratio estimates over a grid of group lower bounds with common random numbers.

    Every grid point sees the same utility draws in trial ``t``.  Infeasible
    grid points are kept in the table with ``estimate = None``; the argmax is
    the feasible point with the largest mean, ties to the first point in
    lexicographic order.
    """
    trials = check_count(trials, name="trials", low=1)
    st, n, p = problem.structure, problem.n, problem.p
    grids = [L1_grid, L2_grid] + ([L3_grid] if L3_grid is not None else [])
    if len(grids) != p:
        raise ValidationError(f"need {p} bound grids, got {len(grids)}")
    axes = []
    for ell, g in enumerate(grids):
        g = np.atleast_1d(np.asarray(g))
        if g.size == 0 or np.any(g != np.round(g)) or np.any(g < 0) or np.any(g > st.group_size(ell)):
            raise ValidationError(f"bound grid for group {ell + 1} must hold integers in [0, {st.group_size(ell)}]")
        axes.append(g.astype(np.int64))
    bounds = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    _, _, _, _, ok = nonintersectional_requirements(st, bounds, n)
    feasible = ok.any(axis=1) & np.all(bounds <= n, axis=1)
    if not feasible.any():
        raise ValidationError("no feasible point on the bound grid")
    active = bounds[feasible]

    def one(t):
        w = dist.sample(trial_rng(seed, t), st.m)
        w_hat = observed_utilities(w, st, bias)
        solver = NonIntersectionalSolver(st, w_hat, n, latent=w)
        _, _, latent, _ = solver.allocate(active)
        return latent / _optimal_latent(w, n)

    ratios = np.stack(_map_trials(one, trials, workers))
    estimates = [None] * len(bounds)
    for col, row in enumerate(np.flatnonzero(feasible)):
        estimates[row] = RatioEstimate.from_ratios(ratios[:, col], seed)
    means = np.array([e.mean if e is not None else -np.inf for e in estimates])
    return SweepResult(bounds, feasible, tuple(estimates), int(np.argmax(means)))


# -- analytic validators ------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    name: str
    empirical: float
    analytic: float
    stderr: float
    z: float
    passed: bool


def _report(name, samples_sum, samples_sq, count, analytic):
    mean = samples_sum / count
    var = max(0.0, (samples_sq - count * mean * mean) / max(count - 1, 1))
    se = math.sqrt(var / count)
    diff = mean - analytic
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(analytic)) else math.inf
    return CheckReport(name, mean, analytic, se, z, abs(z) <= Z_LIMIT)


def expected_top_k_sum(k, m):
    """Expected sum of the ``k`` largest of ``m`` i.i.d. Uniform(0,1) draws."""
    m = check_count(m, name="m", low=1)
    k = check_count(k, name="k", low=1, high=m)
    return k * (1.0 - (k + 1) / (2.0 * (m + 1)))


def order_stat_moments(k, m):
    """Mean and variance of the ``k``-th smallest of ``m`` Uniform(0,1) draws."""
    m = check_count(m, name="m", low=1)
    k = check_count(k, name="k", low=1, high=m)
    return k / (m + 1.0), k * (m - k + 1.0) / ((m + 1.0) ** 2 * (m + 2.0))


def _blocks(trials, width, rng, draw):
    done = 0
    while done < trials:
        size = min(BLOCK, trials - done)
        yield draw(rng, (size, width))
        done += size


def check_unconstrained_expectation(m, n, trials, seed=0):
    """Empirical mean of the top-``n`` sum of Uniform(0,1) draws against its closed form."""
    m = check_count(m, name="m", low=1)
    n = check_count(n, name="n", low=1, high=m)
    trials = check_count(trials, name="trials", low=2)
    rng = np.random.default_rng(seed)
    total = sq = 0.0
    for w in _blocks(trials, m, rng, lambda r, shape: r.random(shape)):
        top = -np.partition(-w, n - 1, axis=1)[:, :n] if n < m else w
        sums = top.sum(axis=1)
        total += math.fsum(sums)
        sq += math.fsum(sums * sums)
    return _report("top_n_sum", total, sq, trials, expected_top_k_sum(n, m))


def check_cell_counts(problem, dist, trials, seed=0):
    """Per-cell mean number of items in the latent-optimal selection vs ``|I| n / m``."""
    trials = check_count(trials, name="trials", low=100)
    st, n = problem.structure, problem.n
    rng = np.random.default_rng(seed)
    sigs = st.signatures
    label = np.empty(st.m, dtype=np.int64)
    for c, sig in enumerate(sigs):
        label[list(st.cells[sig])] = c
    total = np.zeros(len(sigs))
    sq = np.zeros(len(sigs))
    for w in _blocks(trials, st.m, rng, lambda r, shape: dist.sample(r, shape[0] * shape[1]).reshape(shape)):
        top = np.argpartition(-w, n - 1, axis=1)[:, :n] if n < st.m else np.tile(np.arange(st.m), (w.shape[0], 1))
        counts = np.stack([(label[top] == c).sum(axis=1) for c in range(len(sigs))], axis=1).astype(np.float64)
        total += counts.sum(axis=0)
        sq += (counts * counts).sum(axis=0)
    return {
        sig: _report(f"N_{sig}", total[c], sq[c], trials, st.cell_size(sig) * n / st.m)
        for c, sig in enumerate(sigs)
    }
