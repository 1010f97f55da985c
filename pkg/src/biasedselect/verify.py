"""Built-in validator suites run by ``biasedselect verify``."""

from dataclasses import dataclass
import math

import numpy as np

from .core import (
    Intersectional,
    NonIntersectional,
    SelectionProblem,
    build_structure,
    make_balanced_problem,
)
from .distributions import Uniform
from .montecarlo import (
    check_cell_counts,
    check_unconstrained_expectation,
    expected_top_k_sum,
    order_stat_moments,
)
from .selection import brute_force_select, select_constrained


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def random_instance(rng, max_m=10, max_p=3):
    """A small random instance with feasible constraints of a random kind.

    Bounds are read off a random size-n subset and then lowered, so they are
    always satisfiable.  Utilities are rounded to one decimal half the time
    to exercise tie-breaking.
    """
    m = int(rng.integers(1, max_m + 1))
    p = int(rng.integers(1, max_p + 1))
    n = int(rng.integers(1, m + 1))
    sigs = ["".join("1" if b else "0" for b in row) for row in rng.random((m, p)) < 0.5]
    st = build_structure(m, sigs)
    w_hat = rng.random(m)
    if rng.random() < 0.5:
        w_hat = np.round(w_hat, 1)
    witness = np.zeros(m, dtype=bool)
    witness[rng.choice(m, n, replace=False)] = True
    if rng.random() < 0.5:
        got = st.membership[witness].sum(axis=0)
        cons = NonIntersectional(tuple(int(rng.integers(0, g + 1)) for g in got))
    else:
        cons = Intersectional(
            {s: int(rng.integers(0, int(witness[list(items)].sum()) + 1)) for s, items in st.cells.items()}
        )
    return SelectionProblem(st, n), w_hat, cons


def oracle_equivalence(instances=10_000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        prob, w_hat, cons = random_instance(rng)
        fast = select_constrained(w_hat, prob.structure, cons, prob.n).observed_total
        slow = brute_force_select(w_hat, prob.structure, cons, prob.n).observed_total
        worst = max(worst, abs(fast - slow))
    return SuiteResult("oracle_equivalence", worst <= 1e-12, f"{instances} instances, max |diff| = {worst:.3g}")


def order_statistics(trials=100_000, seed=0):
    report = check_unconstrained_expectation(100, 50, trials, seed)
    # closed form of the top-k sum agrees with summing order-statistic means
    exact = all(
        math.isclose(expected_top_k_sum(k, m), math.fsum(order_stat_moments(j, m)[0] for j in range(m - k + 1, m + 1)))
        for m in (1, 7, 50)
        for k in range(1, m + 1)
    )
    rng = np.random.default_rng(seed + 1)
    m, k = 20, 5
    draws = np.sort(rng.random((trials, m)), axis=1)[:, k - 1]
    mean, var = order_stat_moments(k, m)
    z_mean = (draws.mean() - mean) / math.sqrt(var / trials)
    passed = report.passed and exact and abs(z_mean) <= 4.0
    detail = (
        f"top-50-of-100 sum {report.empirical:.5f} vs {report.analytic:.5f} (z={report.z:.2f}); "
        f"5th-of-20 mean z={z_mean:.2f}"
    )
    return SuiteResult("order_statistics", passed, detail)


def hypergeometric(trials=10_000, seed=0):
    prob = make_balanced_problem(400, 2, None, 200)
    reports = check_cell_counts(prob, Uniform(), trials, seed)
    passed = all(r.passed for r in reports.values())
    detail = ", ".join(f"{sig}: {r.empirical:.3f} (z={r.z:.2f})" for sig, r in reports.items())
    return SuiteResult("hypergeometric", passed, detail)


def run_all(seed=0):
    return [oracle_equivalence(seed=seed), order_statistics(seed=seed), hypergeometric(seed=seed)]
