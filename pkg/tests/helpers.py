"""Shared fixtures-as-functions for the test modules."""

import numpy as np

from biasedselect import asymptotics as A
from biasedselect.bias import GeneralBias, MonotonePiecewiseLinear, MultiplicativeBias, PowerOfProduct
from biasedselect.distributions import TruncatedNormal, TruncatedPowerLaw, Uniform
from biasedselect.selection import descending_order

DISTS = [Uniform(), TruncatedNormal(), TruncatedPowerLaw(2.5, 1.0, 5.0)]

# b_11 + b_00 == b_10 + b_01 at every point, so the interaction gap vanishes
ADDITIVE = GeneralBias(
    {
        "10": MonotonePiecewiseLinear(((0, 0), (0.5, 0.4), (1, 0.6))),
        "01": MonotonePiecewiseLinear(((0, 0), (1, 0.7))),
        "11": MonotonePiecewiseLinear(((0, 0), (0.5, 0.25), (1, 0.3))),
    }
)


def assert_top_k_per_cell(sel, w_hat, structure):
    chosen = set(sel.chosen)
    assert len(chosen) == len(sel.chosen)
    assert sum(sel.counts.values()) == len(sel.chosen)
    for sig, items in structure.cells.items():
        cell = np.asarray(items)
        k = sel.counts[sig]
        top = set(cell[descending_order(w_hat[cell])[:k]].tolist())
        assert top == chosen & set(items)


def random_program(rng, dist_index=None):
    """Random feasible (bias, dist, sizes, n, L1, L2) for the continuous program."""
    s = rng.integers(1, 50, 4).astype(float)
    if rng.random() < 0.15:
        s[rng.integers(4)] = 0.0
    n = float(rng.uniform(0.1, 0.9) * s.sum())
    dist = DISTS[int(rng.integers(3)) if dist_index is None else dist_index]
    if rng.random() < 0.7:
        bias = MultiplicativeBias(tuple(rng.uniform(0.05, 1, 2)))
    else:
        bias = GeneralBias({"11": PowerOfProduct(float(rng.uniform(0.5, 2)))}, beta=tuple(rng.uniform(0.1, 1, 2)))
    while True:
        L1 = rng.uniform(0, min(s[0] + s[1], n))
        L2 = rng.uniform(0, min(s[0] + s[2], n))
        if A.relaxation_feasible(s, n, L1, L2):
            return bias, dist, s, n, L1, L2
